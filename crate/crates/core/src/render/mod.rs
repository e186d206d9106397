//! Deterministic multi-pass ray tracer.
//!
//! All passes of a `PassSet` come from one primary-ray traversal per pixel
//! (one ray through each pixel center, no antialiasing), so RGB, depth,
//! instance, and normal images are aligned pixel-for-pixel by construction.
//! Layer outputs — per-object cutouts, amodal layers, shadow layers,
//! per-light images — are exact: modal cutouts partition primary
//! visibility, recomposition reproduces the RGB pass bitwise, and direct
//! lighting is additive per light.
//!
//! Output bytes are a pure function of `(world, camera, settings)`,
//! independent of worker count: rows render in parallel but every pixel's
//! computation is self-contained.

mod tracer;

use crate::geom::{Ray, RayHit};
use crate::image::{Image, Rgba};
use crate::intervention::EditRecord;
use crate::math::Vec3;
use crate::scene::{EntityId, WorldState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
pub(crate) use tracer::{ShadeBuf, Tracer};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("camera position is outside the room volume")]
    CameraOutsideRoom,
    #[error("primary ray escaped the scene at pixel ({x}, {y}); the room is not closed")]
    UncoveredPixel { x: u32, y: u32 },
    #[error("no layer covers pixel ({x}, {y}); layer set incomplete")]
    IncompleteLayerSet { x: u32, y: u32 },
    #[error("edit record is not a removal")]
    NotARemoval,
    #[error("world has {count} entities; the renderer supports at most {max}", max = tracer::MAX_ENTITIES)]
    TooManyEntities { count: usize },
}

/// Registered viewpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub id: String,
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view, radians.
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.position == self.look_at {
            return Err(RenderError::InvalidCamera("position equals look_at".into()));
        }
        if !(self.vfov > 0.0 && self.vfov < std::f64::consts::PI) {
            return Err(RenderError::InvalidCamera("vfov must lie in (0, pi)".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(RenderError::InvalidCamera("width and height must be >= 16".into()));
        }
        let fwd = self.look_at - self.position;
        if fwd.cross(self.up).length_squared() < 1e-18 {
            return Err(RenderError::InvalidCamera("up is parallel to the view direction".into()));
        }
        Ok(())
    }

    pub fn frame(&self) -> CameraFrame {
        let fwd = (self.look_at - self.position).normalized();
        let right = fwd.cross(self.up).normalized();
        let up = right.cross(fwd);
        let tan_y = (self.vfov * 0.5).tan();
        let tan_x = tan_y * (self.width as f64) / (self.height as f64);
        CameraFrame { position: self.position, fwd, right, up, tan_x, tan_y }
    }
}

/// Orthonormal camera basis with frustum half-tangents.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame {
    pub position: Vec3,
    pub fwd: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub tan_x: f64,
    pub tan_y: f64,
}

impl CameraFrame {
    /// Unit ray through the center of pixel (x, y).
    pub fn primary_ray(&self, x: u32, y: u32, width: u32, height: u32) -> Ray {
        let ndc_x = (x as f64 + 0.5) / width as f64 * 2.0 - 1.0;
        let ndc_y = 1.0 - (y as f64 + 0.5) / height as f64 * 2.0;
        let dir = self.fwd + self.right * (ndc_x * self.tan_x) + self.up * (ndc_y * self.tan_y);
        Ray { origin: self.position, dir: dir.normalized() }
    }

    /// True if the point lies inside the view frustum (in front of the
    /// camera and within both half-angle bounds).
    pub fn contains_point(&self, p: Vec3) -> bool {
        let rel = p - self.position;
        let z = rel.dot(self.fwd);
        if z <= 1e-9 {
            return false;
        }
        rel.dot(self.right).abs() <= z * self.tan_x && rel.dot(self.up).abs() <= z * self.tan_y
    }
}

/// Fixed per-render settings. `seed` keys the area-light sample streams;
/// `area_light_samples` is the sample budget stamped into area lights
/// created by the generator and the CLI (each light's own `sample_count`
/// drives the estimator). Gamma only applies at 8-bit export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub area_light_samples: u32,
    /// 0 = diffuse only, 1 = single mirror bounce.
    pub mirror_bounces: u32,
    pub seed: u64,
    pub gamma: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings { area_light_samples: 8, mirror_bounces: 0, seed: 0, gamma: 2.2 }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.mirror_bounces > 1 {
            return Err(RenderError::InvalidCamera("mirror_bounces must be 0 or 1".into()));
        }
        if self.area_light_samples == 0 {
            return Err(RenderError::InvalidCamera("area_light_samples must be positive".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(RenderError::InvalidCamera("gamma must be positive".into()));
        }
        Ok(())
    }
}

/// Per-object layer outputs.
#[derive(Debug, Clone)]
pub struct LayerBundle {
    pub object: EntityId,
    /// Visible pixels of the object, alpha in {0, 1}.
    pub modal_cutout: Image<Rgba>,
    /// The object rendered inside the structural shell only, recovering
    /// camera-occluded regions.
    pub amodal: Image<Rgba>,
    /// Light deficit caused solely by this object blocking shadow segments.
    pub shadow: Image<Vec3>,
    /// Depth where the modal cutout has alpha 1, +inf elsewhere.
    pub layer_depth: Image<f64>,
}

/// Combined cutout of every structural entity.
#[derive(Debug, Clone)]
pub struct StructureLayer {
    pub rgba: Image<Rgba>,
    pub depth: Image<f64>,
}

/// Aligned render outputs. `render_full` fills the first four passes;
/// `render_layers` additionally fills per-light images, the ambient image,
/// per-object bundles, and the structure layer.
#[derive(Debug, Clone)]
pub struct PassSet {
    pub rgb: Image<Vec3>,
    /// Camera-ray hit distance in meters.
    pub depth: Image<f64>,
    /// Per-pixel index into `entity_index`.
    pub instance: Image<u32>,
    pub normal: Image<Vec3>,
    /// Instance-index -> entity id table frozen at render time.
    pub entity_index: Vec<EntityId>,
    pub per_light: Vec<Image<Vec3>>,
    pub ambient_image: Option<Image<Vec3>>,
    pub layers: Vec<LayerBundle>,
    pub structure_layer: Option<StructureLayer>,
}

impl PassSet {
    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    pub fn entity_id_at(&self, x: u32, y: u32) -> &EntityId {
        &self.entity_index[*self.instance.get(x, y) as usize]
    }
}

struct RowOut {
    rgb: Vec<Vec3>,
    depth: Vec<f64>,
    instance: Vec<u32>,
    normal: Vec<Vec3>,
    per_light: Vec<Vec<Vec3>>,
    ambient: Vec<Vec3>,
    credits: Vec<(u32, usize, Vec3)>,
}

fn check_render_inputs(
    world: &WorldState,
    cam: &CameraConfig,
    settings: &RenderSettings,
) -> Result<(), RenderError> {
    cam.validate()?;
    settings.validate()?;
    if world.entities.len() > tracer::MAX_ENTITIES {
        return Err(RenderError::TooManyEntities { count: world.entities.len() });
    }
    let vol = world.room.volume();
    let p = cam.position;
    let strictly_inside = p.x > vol.min.x
        && p.x < vol.max.x
        && p.y > vol.min.y
        && p.y < vol.max.y
        && p.z > vol.min.z
        && p.z < vol.max.z;
    if !strictly_inside {
        return Err(RenderError::CameraOutsideRoom);
    }
    Ok(())
}

fn render_base(
    world: &WorldState,
    cam: &CameraConfig,
    settings: &RenderSettings,
    layers: bool,
) -> Result<PassSet, RenderError> {
    check_render_inputs(world, cam, settings)?;
    let tracer = Tracer::new(world, settings, vec![true; world.entities.len()]);
    let frame = cam.frame();
    let (w, h) = (cam.width, cam.height);
    let n_lights = world.lights.len();

    let rows: Result<Vec<RowOut>, RenderError> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut buf = ShadeBuf::new(n_lights);
            let mut row = RowOut {
                rgb: Vec::with_capacity(w as usize),
                depth: Vec::with_capacity(w as usize),
                instance: Vec::with_capacity(w as usize),
                normal: Vec::with_capacity(w as usize),
                per_light: vec![Vec::with_capacity(if layers { w as usize } else { 0 }); if layers { n_lights } else { 0 }],
                ambient: Vec::with_capacity(if layers { w as usize } else { 0 }),
                credits: Vec::new(),
            };
            for x in 0..w {
                let ray = frame.primary_ray(x, y, w, h);
                let (idx, hit) = tracer
                    .primary_hit(&ray)
                    .ok_or(RenderError::UncoveredPixel { x, y })?;
                buf.reset();
                tracer.shade(idx, &hit, ray.dir, 1.0, tracer.mirror_bounces(), &mut buf, layers);
                row.rgb.push(buf.rgb());
                row.depth.push(hit.t);
                row.instance.push(idx as u32);
                row.normal.push(hit.normal);
                if layers {
                    for li in 0..n_lights {
                        row.per_light[li].push(buf.per_light[li]);
                    }
                    row.ambient.push(buf.ambient);
                    for (e, c) in &buf.credits {
                        row.credits.push((x, *e, *c));
                    }
                }
            }
            Ok(row)
        })
        .collect();
    let rows = rows?;

    let entity_index: Vec<EntityId> = world.entities.iter().map(|e| e.id.clone()).collect();
    let mut pass = PassSet {
        rgb: Image::from_rows(w, h, rows.iter().map(|r| r.rgb.clone()).collect()),
        depth: Image::from_rows(w, h, rows.iter().map(|r| r.depth.clone()).collect()),
        instance: Image::from_rows(w, h, rows.iter().map(|r| r.instance.clone()).collect()),
        normal: Image::from_rows(w, h, rows.iter().map(|r| r.normal.clone()).collect()),
        entity_index,
        per_light: Vec::new(),
        ambient_image: None,
        layers: Vec::new(),
        structure_layer: None,
    };
    if !layers {
        return Ok(pass);
    }

    pass.per_light = (0..n_lights)
        .map(|li| Image::from_rows(w, h, rows.iter().map(|r| r.per_light[li].clone()).collect()))
        .collect();
    pass.ambient_image =
        Some(Image::from_rows(w, h, rows.iter().map(|r| r.ambient.clone()).collect()));

    // Shadow layers from single-blocker credits.
    let mut shadow_by_entity: Vec<Option<Image<Vec3>>> = world
        .entities
        .iter()
        .map(|e| if e.is_dynamic() { Some(Image::new(w, h)) } else { None })
        .collect();
    for (y, row) in rows.iter().enumerate() {
        for (x, entity, credit) in &row.credits {
            if let Some(img) = shadow_by_entity[*entity].as_mut() {
                let cur = *img.get(*x, y as u32);
                img.set(*x, y as u32, cur + *credit);
            }
        }
    }

    // Modal cutouts + structure layer from the aligned passes.
    let structural_mask: Vec<bool> = world.entities.iter().map(|e| e.is_structural()).collect();
    let mut structure_rgba = Image::<Rgba>::new(w, h);
    let mut structure_depth = Image::from_fill(w, h, f64::INFINITY);
    for (x, y, inst) in pass.instance.enumerate() {
        if structural_mask[*inst as usize] {
            structure_rgba.set(x, y, Rgba { rgb: *pass.rgb.get(x, y), alpha: 1.0 });
            structure_depth.set(x, y, *pass.depth.get(x, y));
        }
    }
    pass.structure_layer = Some(StructureLayer { rgba: structure_rgba, depth: structure_depth });

    let mut bundles = Vec::new();
    for (idx, entity) in world.entities.iter().enumerate() {
        if !entity.is_dynamic() {
            continue;
        }
        let mut modal = Image::<Rgba>::new(w, h);
        let mut layer_depth = Image::from_fill(w, h, f64::INFINITY);
        for (x, y, inst) in pass.instance.enumerate() {
            if *inst as usize == idx {
                modal.set(x, y, Rgba { rgb: *pass.rgb.get(x, y), alpha: 1.0 });
                layer_depth.set(x, y, *pass.depth.get(x, y));
            }
        }
        let amodal = render_amodal_pass(world, cam, settings, idx)?;
        bundles.push(LayerBundle {
            object: entity.id.clone(),
            modal_cutout: modal,
            amodal,
            shadow: shadow_by_entity[idx].take().expect("dynamic entity has shadow image"),
            layer_depth,
        });
    }
    pass.layers = bundles;
    Ok(pass)
}

fn render_amodal_pass(
    world: &WorldState,
    cam: &CameraConfig,
    settings: &RenderSettings,
    object_idx: usize,
) -> Result<Image<Rgba>, RenderError> {
    let included: Vec<bool> = world
        .entities
        .iter()
        .enumerate()
        .map(|(i, e)| e.is_structural() || i == object_idx)
        .collect();
    let tracer = Tracer::new(world, settings, included);
    let frame = cam.frame();
    let (w, h) = (cam.width, cam.height);
    let n_lights = world.lights.len();
    let rows: Vec<Vec<Rgba>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut buf = ShadeBuf::new(n_lights);
            let mut row = Vec::with_capacity(w as usize);
            for x in 0..w {
                let ray = frame.primary_ray(x, y, w, h);
                match tracer.primary_hit(&ray) {
                    Some((idx, hit)) if idx == object_idx => {
                        buf.reset();
                        tracer.shade(
                            idx,
                            &hit,
                            ray.dir,
                            1.0,
                            tracer.mirror_bounces(),
                            &mut buf,
                            false,
                        );
                        row.push(Rgba { rgb: buf.rgb(), alpha: 1.0 });
                    }
                    _ => row.push(Rgba::default()),
                }
            }
            row
        })
        .collect();
    Ok(Image::from_rows(w, h, rows))
}

/// Renders the aligned RGB / depth / instance / normal passes.
pub fn render_full(
    world: &WorldState,
    cam: &CameraConfig,
    settings: &RenderSettings,
) -> Result<PassSet, RenderError> {
    render_base(world, cam, settings, false)
}

/// Renders the full pass set including per-object layer bundles, per-light
/// images, the ambient image, and the structure layer.
pub fn render_layers(
    world: &WorldState,
    cam: &CameraConfig,
    settings: &RenderSettings,
) -> Result<PassSet, RenderError> {
    render_base(world, cam, settings, true)
}

/// The definitional route for shadow layers: a full render in which
/// `object` does not occlude shadow segments. `shadow(object)` equals this
/// image minus the plain full render (up to float grouping); the layered
/// renderer accumulates the same terms directly.
pub fn render_shadow_excluded(
    world: &WorldState,
    cam: &CameraConfig,
    settings: &RenderSettings,
    object: &EntityId,
) -> Result<Image<Vec3>, RenderError> {
    check_render_inputs(world, cam, settings)?;
    let object_idx = world
        .entity_index(object)
        .ok_or_else(|| RenderError::InvalidCamera(format!("unknown entity {object}")))?;
    let tracer = Tracer::new(world, settings, vec![true; world.entities.len()])
        .with_shadow_transparent(object_idx);
    let frame = cam.frame();
    let (w, h) = (cam.width, cam.height);
    let n_lights = world.lights.len();
    let rows: Result<Vec<Vec<Vec3>>, RenderError> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut buf = ShadeBuf::new(n_lights);
            let mut row = Vec::with_capacity(w as usize);
            for x in 0..w {
                let ray = frame.primary_ray(x, y, w, h);
                let (idx, hit) =
                    tracer.primary_hit(&ray).ok_or(RenderError::UncoveredPixel { x, y })?;
                buf.reset();
                tracer.shade(idx, &hit, ray.dir, 1.0, tracer.mirror_bounces(), &mut buf, false);
                row.push(buf.rgb());
            }
            Ok(row)
        })
        .collect();
    Ok(Image::from_rows(w, h, rows?))
}

/// Selects, per pixel, the unit-alpha layer with minimum depth among the
/// modal cutouts and the structure layer. Because modal layers partition
/// primary visibility, the result equals the RGB pass exactly.
pub fn recompose(pass: &PassSet) -> Result<Image<Vec3>, RenderError> {
    let structure = pass
        .structure_layer
        .as_ref()
        .ok_or(RenderError::IncompleteLayerSet { x: 0, y: 0 })?;
    let (w, h) = (pass.width(), pass.height());
    let mut out = Image::<Vec3>::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut best: Option<(f64, Vec3)> = None;
            if structure.rgba.get(x, y).alpha == 1.0 {
                best = Some((*structure.depth.get(x, y), structure.rgba.get(x, y).rgb));
            }
            for bundle in &pass.layers {
                if bundle.modal_cutout.get(x, y).alpha == 1.0 {
                    let d = *bundle.layer_depth.get(x, y);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, bundle.modal_cutout.get(x, y).rgb));
                    }
                }
            }
            match best {
                Some((_, rgb)) => out.set(x, y, rgb),
                None => return Err(RenderError::IncompleteLayerSet { x, y }),
            }
        }
    }
    Ok(out)
}

/// Max relative error of the per-light decomposition:
/// `|ambient + sum(per_light) - rgb|_inf / (1 + |rgb|_inf)`.
///
/// Requires a layered pass set (`per_light` and `ambient_image` present).
pub fn light_additivity_check(pass: &PassSet) -> f64 {
    let ambient = pass
        .ambient_image
        .as_ref()
        .expect("light_additivity_check requires a layered pass set");
    let mut max_diff: f64 = 0.0;
    let mut max_rgb: f64 = 0.0;
    for (x, y, rgb) in pass.rgb.enumerate() {
        let mut acc = *ambient.get(x, y);
        for pl in &pass.per_light {
            acc += *pl.get(x, y);
        }
        let d = (acc - *rgb).abs();
        max_diff = max_diff.max(d.max_component());
        max_rgb = max_rgb.max(rgb.abs().max_component());
    }
    max_diff / (1.0 + max_rgb)
}

/// Before/after render pair for a removal intervention, plus the removal
/// mask (pixels whose pre-edit instance belongs to a removed entity).
#[derive(Debug, Clone)]
pub struct CounterfactualRender {
    pub before: PassSet,
    pub after: PassSet,
    pub removal_mask: Image<bool>,
}

pub fn render_counterfactual(
    w_before: &WorldState,
    w_after: &WorldState,
    record: &EditRecord,
    cam: &CameraConfig,
    settings: &RenderSettings,
) -> Result<CounterfactualRender, RenderError> {
    if !record.is_removal() {
        return Err(RenderError::NotARemoval);
    }
    let before = render_full(w_before, cam, settings)?;
    let after = render_full(w_after, cam, settings)?;
    let removed = record.affected();
    let removal_mask =
        before.instance.map(|idx| removed.contains(&before.entity_index[*idx as usize]));
    Ok(CounterfactualRender { before, after, removal_mask })
}

/// Renders a time-indexed state sequence from a set of registered cameras.
/// Frame (t, cam) depends only on `(states[t], cam, settings)`; the outer
/// result is indexed by camera, the inner by frame.
pub fn render_sequence(
    states: &[WorldState],
    cams: &[CameraConfig],
    settings: &RenderSettings,
) -> Result<Vec<Vec<PassSet>>, RenderError> {
    cams.iter()
        .map(|cam| states.iter().map(|w| render_full(w, cam, settings)).collect())
        .collect()
}

/// Amodal layer of one object: the object rendered inside the structural
/// shell alone, with alpha 1 wherever the object is hit.
pub fn render_object_amodal(
    world: &WorldState,
    cam: &CameraConfig,
    settings: &RenderSettings,
    object: &EntityId,
) -> Result<Image<Rgba>, RenderError> {
    check_render_inputs(world, cam, settings)?;
    let idx = world
        .entity_index(object)
        .ok_or_else(|| RenderError::InvalidCamera(format!("unknown entity {object}")))?;
    render_amodal_pass(world, cam, settings, idx)
}

/// Tracer over the full entity set for geometry-only queries (primary hits
/// without shading), used by the camera protocol's overlap measure.
pub(crate) fn full_tracer(world: &WorldState) -> Tracer<'_> {
    Tracer::new(world, &RenderSettings::default(), vec![true; world.entities.len()])
}

/// View-independent shading of a diffuse surface point: exactly the terms
/// the renderer evaluates at a primary hit (for materials with no mirror
/// component). Registered cameras agree on this value at shared points.
pub fn shade_point(
    world: &WorldState,
    settings: &RenderSettings,
    entity: &EntityId,
    point: Vec3,
    normal: Vec3,
) -> Result<Vec3, RenderError> {
    let idx = world
        .entity_index(entity)
        .ok_or_else(|| RenderError::InvalidCamera(format!("unknown entity {entity}")))?;
    let tracer = Tracer::new(world, settings, vec![true; world.entities.len()]);
    let mut buf = ShadeBuf::new(world.lights.len());
    let hit = RayHit { t: 0.0, point, normal };
    tracer.shade(idx, &hit, Vec3::ZERO, 1.0, 0, &mut buf, false);
    Ok(buf.rgb())
}
