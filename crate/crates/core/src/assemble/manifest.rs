//! Manifest schema, JSONL serialization, statistics, and validation.
//!
//! A manifest is UTF-8 JSONL: the header object on the first line, then one
//! `TripletRecord` per line. Image paths are relative to the manifest's
//! directory.

use super::AssembleError;
use crate::imageio;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletPaths {
    pub orig: String,
    pub mask: String,
    pub target: String,
    pub depth: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amodal: Option<String>,
}

/// One orig/mask/target supervision sample. `object_id` is an entity id,
/// or `"ALL"` for scene-level removal. `file_sha256` records content
/// hashes of every written image for the determinism audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub sample_id: String,
    pub room_uuid: String,
    pub scene_path: String,
    pub camera_id: String,
    pub camera_tier: crate::cameras::CameraTier,
    pub object_id: String,
    pub object_class: String,
    pub text_label: String,
    pub mask_area_fraction: f64,
    pub paths: TripletPaths,
    pub split: Split,
    #[serde(default)]
    pub file_sha256: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub engine_version: String,
    pub seed: u64,
    pub min_mask: f64,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<TripletRecord>,
}

/// Reproducible build stamp: the value of `SOURCE_DATE_EPOCH` when set,
/// otherwise the constant `"unset"`. Wall-clock time would break the
/// byte-identical rebuild guarantee.
pub(crate) fn created_at_stamp() -> String {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) if !v.is_empty() => format!("@{v}"),
        _ => "unset".to_string(),
    }
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<(), AssembleError> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&m.header).expect("header serializes"));
    out.push('\n');
    for r in &m.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out.as_bytes())
        .map_err(|source| AssembleError::Io { path: path.display().to_string(), source })
}

pub fn read_manifest(path: &Path) -> Result<Manifest, AssembleError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| AssembleError::Io { path: path.display().to_string(), source })?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| AssembleError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other("empty manifest"),
    })?;
    let header: ManifestHeader =
        serde_json::from_str(header_line).map_err(|source| AssembleError::ManifestParse {
            path: path.display().to_string(),
            line: 1,
            source,
        })?;
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let r: TripletRecord =
            serde_json::from_str(line).map_err(|source| AssembleError::ManifestParse {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
        records.push(r);
    }
    Ok(Manifest { header, records })
}

/// Corpus statistics. `unique_scenes` counts distinct edited-scene
/// instances, i.e. `(scene_path, object_id)` pairs; `items_per_scene` is
/// `images_or_layers / unique_scenes` at two decimal places.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub unique_rooms: u64,
    pub unique_scenes: u64,
    pub images_or_layers: u64,
    pub items_per_scene: f64,
    /// Set when the manifest is empty and the ratio is undefined (reported
    /// as 0.00).
    pub items_per_scene_undefined: bool,
}

impl StatsReport {
    pub fn from_counts(unique_rooms: u64, unique_scenes: u64, images_or_layers: u64) -> Self {
        let (items_per_scene, undefined) = if unique_scenes == 0 {
            (0.0, true)
        } else {
            let ratio = images_or_layers as f64 / unique_scenes as f64;
            ((ratio * 100.0).round() / 100.0, false)
        };
        StatsReport {
            unique_rooms,
            unique_scenes,
            images_or_layers,
            items_per_scene,
            items_per_scene_undefined: undefined,
        }
    }
}

pub fn stats(m: &Manifest) -> StatsReport {
    let rooms: BTreeSet<&str> = m.records.iter().map(|r| r.room_uuid.as_str()).collect();
    let scenes: BTreeSet<(&str, &str)> = m
        .records
        .iter()
        .map(|r| (r.scene_path.as_str(), r.object_id.as_str()))
        .collect();
    StatsReport::from_counts(rooms.len() as u64, scenes.len() as u64, m.records.len() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code")]
pub enum ManifestViolation {
    DuplicateSampleId { sample_id: String },
    MissingFile { sample_id: String, path: String },
    UnreadableFile { sample_id: String, path: String, reason: String },
    MaskAreaMismatch { sample_id: String, recorded: f64, actual: f64 },
    BelowMinMask { sample_id: String, fraction: f64 },
    HashMismatch { sample_id: String, key: String },
    SplitRoomOverlap { room_uuid: String },
}

/// Checks manifest self-consistency against the files on disk:
/// existence and parseability of every referenced image, recomputed mask
/// area within 1e-6 of the recorded fraction, the min-mask filter, split
/// room-disjointness, sample-id uniqueness, and content-hash agreement.
pub fn validate_manifest(m: &Manifest, manifest_dir: &Path) -> Vec<ManifestViolation> {
    let mut out = Vec::new();

    let mut seen_ids = BTreeSet::new();
    let mut room_split: BTreeMap<&str, Split> = BTreeMap::new();

    for r in &m.records {
        if !seen_ids.insert(r.sample_id.as_str()) {
            out.push(ManifestViolation::DuplicateSampleId { sample_id: r.sample_id.clone() });
        }
        if r.mask_area_fraction <= m.header.min_mask {
            out.push(ManifestViolation::BelowMinMask {
                sample_id: r.sample_id.clone(),
                fraction: r.mask_area_fraction,
            });
        }
        match room_split.get(r.room_uuid.as_str()) {
            Some(split) if *split != r.split => {
                out.push(ManifestViolation::SplitRoomOverlap { room_uuid: r.room_uuid.clone() })
            }
            _ => {
                room_split.insert(r.room_uuid.as_str(), r.split);
            }
        }

        let mut files: Vec<(&str, &str)> = vec![
            ("orig", r.paths.orig.as_str()),
            ("mask", r.paths.mask.as_str()),
            ("target", r.paths.target.as_str()),
            ("depth", r.paths.depth.as_str()),
        ];
        if let Some(a) = &r.paths.amodal {
            files.push(("amodal", a.as_str()));
        }
        for (key, rel) in files {
            let path = manifest_dir.join(rel);
            if !path.exists() {
                out.push(ManifestViolation::MissingFile {
                    sample_id: r.sample_id.clone(),
                    path: rel.to_string(),
                });
                continue;
            }
            let parse_result: Result<(), String> = match rel.rsplit('.').next() {
                Some("ppm") => imageio::read_ppm(&path).map(|_| ()).map_err(|e| e.to_string()),
                Some("pgm") => {
                    imageio::read_pgm_mask(&path).map(|_| ()).map_err(|e| e.to_string())
                }
                Some("pfm") => imageio::read_pfm(&path).map(|_| ()).map_err(|e| e.to_string()),
                other => Err(format!("unknown extension {other:?}")),
            };
            if let Err(reason) = parse_result {
                out.push(ManifestViolation::UnreadableFile {
                    sample_id: r.sample_id.clone(),
                    path: rel.to_string(),
                    reason,
                });
                continue;
            }
            if let Some(expected) = r.file_sha256.get(key) {
                let bytes = std::fs::read(&path).unwrap_or_default();
                if &super::sha256_hex(&bytes) != expected {
                    out.push(ManifestViolation::HashMismatch {
                        sample_id: r.sample_id.clone(),
                        key: key.to_string(),
                    });
                }
            }
        }

        let mask_path = manifest_dir.join(&r.paths.mask);
        if let Ok(mask) = imageio::read_pgm_mask(&mask_path) {
            let actual = super::mask_fraction(&mask);
            if (actual - r.mask_area_fraction).abs() > 1e-6 {
                out.push(ManifestViolation::MaskAreaMismatch {
                    sample_id: r.sample_id.clone(),
                    recorded: r.mask_area_fraction,
                    actual,
                });
            }
        }
    }
    out
}
