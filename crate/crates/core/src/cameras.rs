//! Tiered multi-view camera protocol: one base camera aimed at a target,
//! high-overlap similar views, and diverse views (bird's-eye, corner,
//! random), each filtered by same-room line-of-sight, wall clearance, and
//! 7-point bounding-box visibility.

use crate::geom::segment_blocked;
use crate::math::{mix_parts, mix_str, Aabb, Vec3};
use crate::render::CameraConfig;
use crate::scene::{EntityId, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const TAG_CAMERAS: u64 = 0x43414d53; // "CAMS"

/// Default minimum distance from walls, floor, and ceiling (meters).
pub const DEFAULT_WALL_CLEARANCE: f64 = 0.3;
/// Default minimum visible probe points (of 7).
pub const DEFAULT_K_MIN: u32 = 3;
/// Similar-tier cameras must cover this fraction of the base camera's
/// surface points.
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.70;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CameraTier {
    #[serde(rename = "base_camera")]
    BaseCamera,
    #[serde(rename = "camera_similar")]
    CameraSimilar,
    #[serde(rename = "camera_diff")]
    CameraDiff,
}

impl CameraTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            CameraTier::BaseCamera => "base_camera",
            CameraTier::CameraSimilar => "camera_similar",
            CameraTier::CameraDiff => "camera_diff",
        }
    }
}

/// Which entities occlude a line-of-sight test.
#[derive(Debug, Clone, PartialEq)]
pub enum OccluderSet {
    /// Structural entities only (same-room check).
    StructureOnly,
    /// Everything except the named target (target visibility checks).
    AllButTarget(EntityId),
    /// Every entity (surface covisibility).
    All,
}

/// Protocol-check outcome attached to each emitted camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub los_ok: bool,
    pub clearance_ok: bool,
    pub seven_point_ok: bool,
    pub visible_points: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_with_base: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("target not found: {0}")]
    TargetNotFound(EntityId),
    #[error("target is structural: {0}")]
    TargetStructural(EntityId),
    #[error("no base camera found after {attempts} candidates")]
    BaseCameraNotFound { attempts: u32 },
}

/// True iff the open segment from the camera position to `point` crosses no
/// geometry in the occluder set.
pub fn los_check(
    cam: &CameraConfig,
    point: Vec3,
    world: &WorldState,
    occluders: &OccluderSet,
) -> bool {
    los_from(cam.position, point, world, occluders)
}

fn los_from(origin: Vec3, point: Vec3, world: &WorldState, occluders: &OccluderSet) -> bool {
    for e in &world.entities {
        let occludes = match occluders {
            OccluderSet::StructureOnly => e.is_structural(),
            OccluderSet::AllButTarget(target) => &e.id != target,
            OccluderSet::All => true,
        };
        if occludes && segment_blocked(&e.geometry, origin, point) {
            return false;
        }
    }
    true
}

/// True iff the camera sits inside the room volume with at least `d_min`
/// clearance from every wall, the floor, and the ceiling plane.
pub fn wall_clearance(cam: &CameraConfig, world: &WorldState, d_min: f64) -> bool {
    let vol = world.room.volume();
    let p = cam.position;
    p.x >= vol.min.x + d_min
        && p.x <= vol.max.x - d_min
        && p.y >= vol.min.y + d_min
        && p.y <= vol.max.y - d_min
        && p.z >= vol.min.z + d_min
        && p.z <= vol.max.z - d_min
}

/// The 7 probe points of a target: its AABB center plus the 6 face centers.
pub fn probe_points(aabb: &Aabb) -> [Vec3; 7] {
    let c = aabb.center();
    [
        c,
        Vec3::new(aabb.min.x, c.y, c.z),
        Vec3::new(aabb.max.x, c.y, c.z),
        Vec3::new(c.x, aabb.min.y, c.z),
        Vec3::new(c.x, aabb.max.y, c.z),
        Vec3::new(c.x, c.y, aabb.min.z),
        Vec3::new(c.x, c.y, aabb.max.z),
    ]
}

/// Counts probe points that are inside the view frustum and unoccluded
/// (with the target excluded from its own test). Passes when at least
/// `k_min` points are visible.
pub fn seven_point_visibility(
    cam: &CameraConfig,
    target: &EntityId,
    world: &WorldState,
    k_min: u32,
) -> Result<(bool, u32), CameraError> {
    let aabb = world
        .world_aabb(target)
        .map_err(|_| CameraError::TargetNotFound(target.clone()))?;
    let frame = cam.frame();
    let occluders = OccluderSet::AllButTarget(target.clone());
    let mut visible = 0;
    for p in probe_points(&aabb) {
        if frame.contains_point(p) && los_check(cam, p, world, &occluders) {
            visible += 1;
        }
    }
    Ok((visible >= k_min, visible))
}

/// Surface covisibility of `cam_b` with respect to `cam_a`: the fraction of
/// `cam_a`'s primary hit points (on a stride-subsampled pixel grid) that
/// lie inside `cam_b`'s frustum with clear line of sight from `cam_b`
/// against all entities. Identical cameras give exactly 1. Not symmetric.
pub fn overlap(cam_a: &CameraConfig, cam_b: &CameraConfig, world: &WorldState, stride: u32) -> f64 {
    let stride = stride.max(1);
    let tracer = crate::render::full_tracer(world);
    let frame_a = cam_a.frame();
    let frame_b = cam_b.frame();
    let mut total = 0u64;
    let mut covered = 0u64;
    let mut y = 0;
    while y < cam_a.height {
        let mut x = 0;
        while x < cam_a.width {
            let ray = frame_a.primary_ray(x, y, cam_a.width, cam_a.height);
            if let Some((_, hit)) = tracer.primary_hit(&ray) {
                total += 1;
                if frame_b.contains_point(hit.point)
                    && los_from(frame_b.position, hit.point, world, &OccluderSet::All)
                {
                    covered += 1;
                }
            }
            x += stride;
        }
        y += stride;
    }
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

/// Knobs of the camera protocol; `n_similar` / `n_diff` arrive as explicit
/// arguments of `sample_cameras`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraProtocolConfig {
    pub d_min: f64,
    pub k_min: u32,
    pub overlap_threshold: f64,
    /// Max positional jitter of similar-tier candidates (meters).
    pub position_jitter: f64,
    /// Max rotational jitter of similar-tier candidates (radians).
    pub rotation_jitter: f64,
    /// Candidate budget per slot.
    pub max_candidates: u32,
    pub overlap_stride: u32,
    pub width: u32,
    pub height: u32,
    pub vfov: f64,
}

impl Default for CameraProtocolConfig {
    fn default() -> Self {
        CameraProtocolConfig {
            d_min: DEFAULT_WALL_CLEARANCE,
            k_min: DEFAULT_K_MIN,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            position_jitter: 0.4,
            rotation_jitter: 15.0f64.to_radians(),
            max_candidates: 500,
            overlap_stride: 8,
            width: 256,
            height: 192,
            vfov: 60.0f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampledCamera {
    pub camera: CameraConfig,
    pub tier: CameraTier,
    pub report: ProtocolReport,
}

struct Checker<'w> {
    world: &'w WorldState,
    target: EntityId,
    target_center: Vec3,
    cfg: &'w CameraProtocolConfig,
}

impl Checker<'_> {
    /// Runs the full protocol; `Some(report)` only when every check passes.
    /// Candidates embedded inside scene geometry are degenerate and
    /// rejected outright.
    fn check(&self, cam: &CameraConfig) -> Option<ProtocolReport> {
        if cam.validate().is_err() {
            return None;
        }
        if self
            .world
            .entities
            .iter()
            .any(|e| crate::geom::point_inside(&e.geometry, cam.position))
        {
            return None;
        }
        let clearance_ok = wall_clearance(cam, self.world, self.cfg.d_min);
        if !clearance_ok {
            return None;
        }
        let (seven_point_ok, visible_points) =
            seven_point_visibility(cam, &self.target, self.world, self.cfg.k_min).ok()?;
        if !seven_point_ok {
            return None;
        }
        let los_ok = los_check(
            cam,
            self.target_center,
            self.world,
            &OccluderSet::AllButTarget(self.target.clone()),
        );
        if !los_ok {
            return None;
        }
        Some(ProtocolReport {
            los_ok,
            clearance_ok,
            seven_point_ok,
            visible_points,
            overlap_with_base: None,
        })
    }
}

/// Samples the tiered camera set for one target: exactly one base camera,
/// up to `n_similar` high-overlap perturbations of it, and up to `n_diff`
/// diverse views (bird's-eye / corner / random templates). Deterministic in
/// `seed`; partial similar/diff fills are allowed and reflected in the
/// output length.
pub fn sample_cameras(
    world: &WorldState,
    target: &EntityId,
    n_similar: u32,
    n_diff: u32,
    seed: u64,
    cfg: &CameraProtocolConfig,
) -> Result<Vec<SampledCamera>, CameraError> {
    let entity = world
        .entity(target)
        .ok_or_else(|| CameraError::TargetNotFound(target.clone()))?;
    if entity.is_structural() {
        return Err(CameraError::TargetStructural(target.clone()));
    }
    let target_center = entity.geometry.aabb().center();
    let checker = Checker { world, target: target.clone(), target_center, cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_parts(&[
        seed,
        TAG_CAMERAS,
        mix_str(&world.room.room_uuid),
        mix_str(target.as_str()),
    ]));
    let vol = world.room.volume();
    let d = cfg.d_min;
    let lo = vol.min + Vec3::splat(d);
    let hi = vol.max - Vec3::splat(d);
    if lo.x >= hi.x || lo.y >= hi.y || lo.z >= hi.z {
        return Err(CameraError::BaseCameraNotFound { attempts: 0 });
    }

    let make_camera = |id: String, position: Vec3, look_at: Vec3| CameraConfig {
        id,
        position,
        look_at,
        up: Vec3::new(0.0, 0.0, 1.0),
        vfov: cfg.vfov,
        width: cfg.width,
        height: cfg.height,
    };
    let sample_interior = |rng: &mut ChaCha8Rng| {
        Vec3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        )
    };

    let mut out: Vec<SampledCamera> = Vec::new();

    // Base camera: random interior pose aimed at the target.
    let mut base: Option<CameraConfig> = None;
    for _ in 0..cfg.max_candidates {
        let position = sample_interior(&mut rng);
        if (position - target_center).length() < 0.2 {
            continue;
        }
        let cam = make_camera(format!("base_camera_{:02}", out.len()), position, target_center);
        if let Some(report) = checker.check(&cam) {
            out.push(SampledCamera { camera: cam.clone(), tier: CameraTier::BaseCamera, report });
            base = Some(cam);
            break;
        }
    }
    let base = base.ok_or(CameraError::BaseCameraNotFound { attempts: cfg.max_candidates })?;

    // Similar tier: jittered copies of the base gated by overlap.
    for _slot in 0..n_similar {
        for _ in 0..cfg.max_candidates {
            let jitter = loop {
                let v = Vec3::new(
                    rng.random_range(-cfg.position_jitter..cfg.position_jitter),
                    rng.random_range(-cfg.position_jitter..cfg.position_jitter),
                    rng.random_range(-cfg.position_jitter..cfg.position_jitter),
                );
                if v.length() <= cfg.position_jitter {
                    break v;
                }
            };
            let position = base.position + jitter;
            let view = base.look_at - base.position;
            let rotated = jitter_direction(&mut rng, view.normalized(), cfg.rotation_jitter);
            let look_at = position + rotated * view.length();
            let cam =
                make_camera(format!("camera_similar_{:02}", out.len()), position, look_at);
            let Some(mut report) = checker.check(&cam) else { continue };
            let ov = overlap(&cam, &base, world, cfg.overlap_stride);
            if ov <= cfg.overlap_threshold {
                continue;
            }
            report.overlap_with_base = Some(ov);
            out.push(SampledCamera { camera: cam, tier: CameraTier::CameraSimilar, report });
            break;
        }
    }

    // Diverse tier: bird's-eye, corner, and random templates in rotation.
    for slot in 0..n_diff {
        for _ in 0..cfg.max_candidates {
            let candidate = match slot % 3 {
                0 => {
                    // Bird's-eye: elevated, pitched down at least 45 degrees,
                    // which bounds the horizontal distance by the drop.
                    let z = hi.z;
                    let drop = z - target_center.z;
                    if drop <= 0.05 {
                        sample_interior(&mut rng)
                    } else {
                        let r = rng.random_range(0.0..drop.min(3.0));
                        let theta = rng.random_range(0.0..std::f64::consts::TAU);
                        Vec3::new(
                            (target_center.x + r * theta.cos()).clamp(lo.x, hi.x),
                            (target_center.y + r * theta.sin()).clamp(lo.y, hi.y),
                            z,
                        )
                    }
                }
                1 => {
                    // Corner view at the clearance limit.
                    let cx = if rng.random_bool(0.5) { lo.x } else { hi.x };
                    let cy = if rng.random_bool(0.5) { lo.y } else { hi.y };
                    Vec3::new(cx, cy, rng.random_range((0.4 * vol.max.z).max(lo.z)..hi.z))
                }
                _ => sample_interior(&mut rng),
            };
            if (candidate - target_center).length() < 0.2 {
                continue;
            }
            let cam =
                make_camera(format!("camera_diff_{:02}", out.len()), candidate, target_center);
            if slot % 3 == 0 {
                // Enforce the bird's-eye pitch.
                let v = target_center - candidate;
                let horizontal = v.x.hypot(v.y);
                if (-v.z).atan2(horizontal) < 45.0f64.to_radians() {
                    continue;
                }
            }
            if let Some(report) = checker.check(&cam) {
                out.push(SampledCamera { camera: cam, tier: CameraTier::CameraDiff, report });
                break;
            }
        }
    }

    Ok(out)
}

/// Rotates `dir` by a random angle up to `max_angle` about a random axis
/// orthogonal to it.
fn jitter_direction(rng: &mut ChaCha8Rng, dir: Vec3, max_angle: f64) -> Vec3 {
    let reference = if dir.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let ortho_a = dir.cross(reference).normalized();
    let ortho_b = dir.cross(ortho_a);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let angle = rng.random_range(0.0..max_angle);
    let axis_blend = ortho_a * phi.cos() + ortho_b * phi.sin();
    (dir * angle.cos() + axis_blend * angle.sin()).normalized()
}

/// Serialized form of an emitted camera for the scene sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub id: String,
    pub tier: CameraTier,
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
    pub report: ProtocolReport,
}

impl From<&SampledCamera> for CameraRecord {
    fn from(s: &SampledCamera) -> Self {
        CameraRecord {
            id: s.camera.id.clone(),
            tier: s.tier,
            position: s.camera.position,
            look_at: s.camera.look_at,
            up: s.camera.up,
            vfov: s.camera.vfov,
            width: s.camera.width,
            height: s.camera.height,
            report: s.report.clone(),
        }
    }
}

impl CameraRecord {
    pub fn to_config(&self) -> CameraConfig {
        CameraConfig {
            id: self.id.clone(),
            position: self.position,
            look_at: self.look_at,
            up: self.up,
            vfov: self.vfov,
            width: self.width,
            height: self.height,
        }
    }
}
