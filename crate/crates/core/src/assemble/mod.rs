//! Dataset assembly: removal triplets, registered multi-view sets, and
//! scene-level removal pairs, with mask-area filtering, room-disjoint
//! splits, statistics, and manifest validation.
//!
//! Scenes process concurrently but manifests assemble in deterministic
//! scene order, so rebuilding with the same inputs, seed, and config
//! reproduces manifest and image bytes exactly, at any worker count.
//! Individual sample failures are logged and skipped; scene-level IO
//! failures abort the batch.

mod manifest;

pub use manifest::{
    read_manifest, stats, validate_manifest, write_manifest, Manifest, ManifestHeader,
    ManifestViolation, Split, StatsReport, TripletPaths, TripletRecord,
};

use crate::cameras::{sample_cameras, CameraProtocolConfig, SampledCamera};
use crate::image::Image;
use crate::imageio;
use crate::intervention::{intervene, EditRecord, Intervention, PropagationPolicy};
use crate::math::{mix_parts, mix_str};
use crate::render::{
    render_counterfactual, render_object_amodal, CounterfactualRender, RenderSettings,
};
use crate::scene::{load_world, to_canonical_json, validate_world, EntityId, Violation, WorldState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

const TAG_SAMPLE_CAMS: u64 = 0x53414d43; // "SAMC"
const TAG_SPLIT: u64 = 0x53504c54; // "SPLT"

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("io failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneIoError),
    #[error("scene {path} fails validation: {violations:?}")]
    InvalidScene { path: String, violations: Vec<Violation> },
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("manifest {path} line {line}: {source}")]
    ManifestParse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AssembleError + '_ {
    move |source| AssembleError::Io { path: path.display().to_string(), source }
}

/// Pipeline knobs shared by the three dataset builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembleConfig {
    /// Records with mask_area_fraction at or below this are dropped.
    pub min_mask: f64,
    /// Views per (scene, object) in the single-view removal dataset: one
    /// base camera plus diverse extras.
    pub cameras_per_scene: u32,
    /// Similar/diverse view counts for the multi-view dataset.
    pub n_similar: u32,
    pub n_diff: u32,
    pub policy: PropagationPolicy,
    pub camera: CameraProtocolConfig,
    pub render: RenderSettings,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig {
            min_mask: 0.003,
            cameras_per_scene: 1,
            n_similar: 3,
            n_diff: 4,
            policy: PropagationPolicy::Cascade,
            camera: CameraProtocolConfig::default(),
            render: RenderSettings::default(),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_valid_scene(path: &Path) -> Result<WorldState, AssembleError> {
    let world = load_world(path)?;
    let violations = validate_world(&world);
    if !violations.is_empty() {
        return Err(AssembleError::InvalidScene {
            path: path.display().to_string(),
            violations,
        });
    }
    Ok(world)
}

/// Mask pixel share of the full frame.
pub fn mask_fraction(mask: &Image<bool>) -> f64 {
    mask.pixels().filter(|m| **m).count() as f64 / mask.pixel_count() as f64
}

/// The emission gate: a record is kept only when its mask covers strictly
/// more than `min_mask` of the frame.
pub fn passes_mask_filter(fraction: f64, min_mask: f64) -> bool {
    fraction > min_mask
}

struct SampleFiles {
    paths: TripletPaths,
    hashes: BTreeMap<String, String>,
}

/// Writes one sample's image files and returns manifest-relative paths and
/// content hashes. `amodal` carries the removed object's amodal layer for
/// object-level removals.
fn write_sample_files(
    out_dir: &Path,
    sample_id: &str,
    cf: &CounterfactualRender,
    amodal: Option<&Image<crate::image::Rgba>>,
    gamma: f64,
) -> Result<SampleFiles, AssembleError> {
    let rel_dir = format!("samples/{sample_id}");
    let dir = out_dir.join(&rel_dir);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let mut hashes = BTreeMap::new();
    let mut run = |name: &str,
                   write: &dyn Fn(&Path) -> Result<(), imageio::ImageIoError>|
     -> Result<String, AssembleError> {
        let rel = format!("{rel_dir}/{name}");
        let path = out_dir.join(&rel);
        write(&path).map_err(|e| AssembleError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        hashes.insert(name.split('.').next().unwrap_or(name).to_string(), sha256_hex(&bytes));
        Ok(rel)
    };

    let orig = run("orig.ppm", &|p| imageio::write_ppm(p, &cf.before.rgb, gamma))?;
    let mask = run("mask.pgm", &|p| imageio::write_pgm_mask(p, &cf.removal_mask))?;
    let target = run("target.ppm", &|p| imageio::write_ppm(p, &cf.after.rgb, gamma))?;
    let depth = run("depth.pfm", &|p| imageio::write_pfm_gray(p, &cf.before.depth))?;
    let amodal_rel = match amodal {
        Some(layer) => {
            let rgb = layer.map(|px| px.rgb);
            let alpha = layer.map(|px| px.alpha);
            let rel = run("amodal.pfm", &|p| imageio::write_pfm_rgb(p, &rgb))?;
            run("amodal_alpha.pfm", &|p| imageio::write_pfm_gray(p, &alpha))?;
            Some(rel)
        }
        None => None,
    };

    Ok(SampleFiles {
        paths: TripletPaths { orig, mask, target, depth, amodal: amodal_rel },
        hashes,
    })
}

/// Writes the shared edited-scene file and edit record for one
/// intervention group, so every view of the group references one state.
fn write_edit_group(
    out_dir: &Path,
    room_uuid: &str,
    object_key: &str,
    after: &WorldState,
    record: &EditRecord,
) -> Result<(), AssembleError> {
    let dir = out_dir.join("edits").join(room_uuid);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let scene_path = dir.join(format!("{object_key}.after.json"));
    std::fs::write(&scene_path, to_canonical_json(after)?.as_bytes())
        .map_err(io_err(&scene_path))?;
    let record_path = dir.join(format!("{object_key}.record.json"));
    std::fs::write(
        &record_path,
        serde_json::to_string_pretty(record).expect("edit record serializes"),
    )
    .map_err(io_err(&record_path))?;
    Ok(())
}

fn manifest_header(seed: u64, min_mask: f64) -> ManifestHeader {
    ManifestHeader {
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        min_mask,
        created_at: manifest::created_at_stamp(),
    }
}

struct SceneJob<'a> {
    scene_path: &'a Path,
    cfg: &'a AssembleConfig,
    seed: u64,
    out_dir: &'a Path,
}

impl SceneJob<'_> {
    fn scene_path_str(&self) -> String {
        self.scene_path.display().to_string()
    }

    fn camera_seed(&self, room_uuid: &str, object: &str) -> u64 {
        mix_parts(&[self.seed, TAG_SAMPLE_CAMS, mix_str(room_uuid), mix_str(object)])
    }

    /// Renders the counterfactual pair for one (object group, camera) and
    /// emits a record when the mask passes the area filter.
    fn emit_sample(
        &self,
        world: &WorldState,
        after: &WorldState,
        record: &EditRecord,
        cam: &SampledCamera,
        object_label: &str,
        object_class: &str,
        text_label: &str,
        amodal_of: Option<&EntityId>,
    ) -> Result<Option<TripletRecord>, String> {
        let room_uuid = &world.room.room_uuid;
        let cf = render_counterfactual(world, after, record, &cam.camera, &self.cfg.render)
            .map_err(|e| format!("render failed: {e}"))?;
        let fraction = mask_fraction(&cf.removal_mask);
        if !passes_mask_filter(fraction, self.cfg.min_mask) {
            return Ok(None);
        }
        let amodal = match amodal_of {
            Some(id) => Some(
                render_object_amodal(world, &cam.camera, &self.cfg.render, id)
                    .map_err(|e| format!("amodal render failed: {e}"))?,
            ),
            None => None,
        };
        let sample_id = format!("{room_uuid}_{object_label}_{}", cam.camera.id);
        let files = write_sample_files(
            self.out_dir,
            &sample_id,
            &cf,
            amodal.as_ref(),
            self.cfg.render.gamma,
        )
        .map_err(|e| format!("file write failed: {e}"))?;
        Ok(Some(TripletRecord {
            sample_id,
            room_uuid: room_uuid.clone(),
            scene_path: self.scene_path_str(),
            camera_id: cam.camera.id.clone(),
            camera_tier: cam.tier,
            object_id: object_label.to_string(),
            object_class: object_class.to_string(),
            text_label: text_label.to_string(),
            mask_area_fraction: fraction,
            paths: files.paths,
            split: Split::Train,
            file_sha256: files.hashes,
        }))
    }
}

/// One record per (scene, dynamic object, accepted camera): a Remove
/// intervention rendered as an orig/mask/target triplet with depth and the
/// removed object's amodal layer, filtered by mask area.
pub fn build_removal_dataset(
    scene_paths: &[PathBuf],
    cfg: &AssembleConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest, AssembleError> {
    build_objectwise(scene_paths, cfg, seed, out_dir, false)
}

/// Multi-view variant: per (scene, object) one base camera plus similar and
/// diverse tiers, all rendering the same before/after states.
pub fn build_multiview_dataset(
    scene_paths: &[PathBuf],
    cfg: &AssembleConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest, AssembleError> {
    build_objectwise(scene_paths, cfg, seed, out_dir, true)
}

fn build_objectwise(
    scene_paths: &[PathBuf],
    cfg: &AssembleConfig,
    seed: u64,
    out_dir: &Path,
    multiview: bool,
) -> Result<Manifest, AssembleError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let per_scene: Result<Vec<Vec<TripletRecord>>, AssembleError> = scene_paths
        .par_iter()
        .map(|scene_path| {
            let world = load_valid_scene(scene_path)?;
            let job = SceneJob { scene_path, cfg, seed, out_dir };
            let mut records = Vec::new();
            let objects: Vec<EntityId> =
                world.dynamic_entities().map(|e| e.id.clone()).collect();
            for object in &objects {
                let (n_similar, n_diff) = if multiview {
                    (cfg.n_similar, cfg.n_diff)
                } else {
                    (0, cfg.cameras_per_scene.saturating_sub(1))
                };
                let cam_seed = job.camera_seed(&world.room.room_uuid, object.as_str());
                let cams = match sample_cameras(
                    &world,
                    object,
                    n_similar,
                    n_diff,
                    cam_seed,
                    &cfg.camera,
                ) {
                    Ok(c) => c,
                    Err(e) => {
                        log::warn!("skipping {object} in {}: {e}", job.scene_path_str());
                        continue;
                    }
                };
                let intervention = Intervention::Remove { target: object.clone() };
                let (after, record) = match intervene(&world, &intervention, cfg.policy) {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("skipping {object} in {}: {e}", job.scene_path_str());
                        continue;
                    }
                };
                if let Err(e) = write_edit_group(
                    out_dir,
                    &world.room.room_uuid,
                    object.as_str(),
                    &after,
                    &record,
                ) {
                    log::warn!("edit group write failed for {object}: {e}");
                    continue;
                }
                let class = world.entity(object).expect("object exists").class.clone();
                let label = world.text_label(object).unwrap_or_default();
                for cam in &cams {
                    match job.emit_sample(
                        &world,
                        &after,
                        &record,
                        cam,
                        object.as_str(),
                        &class,
                        &label,
                        Some(object),
                    ) {
                        Ok(Some(r)) => records.push(r),
                        Ok(None) => {}
                        Err(e) => log::warn!(
                            "skipping sample {}/{}/{}: {e}",
                            job.scene_path_str(),
                            object,
                            cam.camera.id
                        ),
                    }
                }
            }
            Ok(records)
        })
        .collect();

    let records: Vec<TripletRecord> = per_scene?.into_iter().flatten().collect();
    let m = Manifest { header: manifest_header(seed, cfg.min_mask), records };
    write_manifest(&m, &out_dir.join("manifest.jsonl"))?;
    write_stats_report(&m, out_dir)?;
    Ok(m)
}

/// One record per room: the full scene against the same room with every
/// dynamic object removed; the mask is the union of all dynamic pixels.
pub fn build_scene_removal_dataset(
    scene_paths: &[PathBuf],
    cfg: &AssembleConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest, AssembleError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let per_scene: Result<Vec<Vec<TripletRecord>>, AssembleError> = scene_paths
        .par_iter()
        .map(|scene_path| {
            let world = load_valid_scene(scene_path)?;
            let job = SceneJob { scene_path, cfg, seed, out_dir };
            // Aim the camera at the largest dynamic object (stable
            // tiebreak by id); rooms without dynamics contribute nothing.
            let target = world
                .dynamic_entities()
                .map(|e| {
                    let b = e.geometry.aabb();
                    let d = b.max - b.min;
                    (e.id.clone(), d.x * d.y * d.z)
                })
                .max_by(|(ia, va), (ib, vb)| {
                    va.partial_cmp(vb).unwrap().then_with(|| ib.cmp(ia))
                })
                .map(|(id, _)| id);
            let Some(target) = target else {
                log::warn!("{}: no dynamic objects, skipping", job.scene_path_str());
                return Ok(Vec::new());
            };
            let cam_seed = job.camera_seed(&world.room.room_uuid, "ALL");
            let cams =
                match sample_cameras(&world, &target, 0, 0, cam_seed, &cfg.camera) {
                    Ok(c) => c,
                    Err(e) => {
                        log::warn!("{}: {e}", job.scene_path_str());
                        return Ok(Vec::new());
                    }
                };
            let (after, record) =
                match intervene(&world, &Intervention::RemoveAllDynamic, cfg.policy) {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("{}: {e}", job.scene_path_str());
                        return Ok(Vec::new());
                    }
                };
            if let Err(e) =
                write_edit_group(out_dir, &world.room.room_uuid, "ALL", &after, &record)
            {
                log::warn!("edit group write failed: {e}");
                return Ok(Vec::new());
            }
            let mut records = Vec::new();
            for cam in &cams {
                match job.emit_sample(
                    &world,
                    &after,
                    &record,
                    cam,
                    "ALL",
                    "ALL",
                    "an empty room",
                    None,
                ) {
                    Ok(Some(r)) => records.push(r),
                    Ok(None) => {}
                    Err(e) => log::warn!("{}: {e}", job.scene_path_str()),
                }
            }
            Ok(records)
        })
        .collect();

    let records: Vec<TripletRecord> = per_scene?.into_iter().flatten().collect();
    let m = Manifest { header: manifest_header(seed, cfg.min_mask), records };
    write_manifest(&m, &out_dir.join("manifest.jsonl"))?;
    write_stats_report(&m, out_dir)?;
    Ok(m)
}

fn write_stats_report(m: &Manifest, out_dir: &Path) -> Result<(), AssembleError> {
    let report = stats(m);
    let path = out_dir.join("stats.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("stats serialize"))
        .map_err(io_err(&path))
}

/// Reassigns splits at room granularity: rooms shuffle deterministically by
/// seed and move to the test split until the test share of samples first
/// reaches `test_fraction`. Train/test room sets never overlap.
pub fn split_by_room(
    m: &Manifest,
    test_fraction: f64,
    seed: u64,
) -> Result<Manifest, AssembleError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AssembleError::DegenerateSplit(format!(
            "test_fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &m.records {
        *counts.entry(r.room_uuid.as_str()).or_default() += 1;
    }
    let mut rooms: Vec<&str> = counts.keys().copied().collect();
    if rooms.len() < 2 {
        return Err(AssembleError::DegenerateSplit(format!(
            "{} room(s) cannot form disjoint non-empty splits",
            rooms.len()
        )));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_parts(&[seed, TAG_SPLIT]));
    rooms.shuffle(&mut rng);

    let total: u64 = counts.values().sum();
    let mut test_rooms: Vec<&str> = Vec::new();
    let mut test_samples = 0u64;
    for room in &rooms {
        if (test_samples as f64) / (total as f64) >= test_fraction {
            break;
        }
        test_rooms.push(room);
        test_samples += counts[room];
    }
    if test_rooms.is_empty() || test_rooms.len() == rooms.len() {
        return Err(AssembleError::DegenerateSplit("a split would be empty".into()));
    }
    let test_set: std::collections::BTreeSet<&str> = test_rooms.into_iter().collect();
    let mut out = m.clone();
    for r in &mut out.records {
        r.split = if test_set.contains(r.room_uuid.as_str()) { Split::Test } else { Split::Train };
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
