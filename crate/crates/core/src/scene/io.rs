//! Scene file serialization.
//!
//! Scene files are UTF-8 JSON with every float written with 9 significant
//! digits (`{:.8e}`). The formatting is idempotent: serialize → deserialize
//! → serialize reproduces the bytes exactly, which is what the pipeline's
//! byte-level determinism checks lean on.

use super::WorldState;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scene JSON in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// serde_json formatter that renders every f64 with 9 significant digits.
struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{:.8e}", value)
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{:.8e}", value)
    }
}

/// Canonical scene-file serialization (also used for any value that must be
/// byte-stable across runs, e.g. edited-scene files written by the pipeline).
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, SceneIoError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json produces UTF-8"))
}

pub fn from_canonical_json(s: &str) -> Result<WorldState, serde_json::Error> {
    serde_json::from_str(s)
}

pub fn save_world(world: &WorldState, path: &Path) -> Result<(), SceneIoError> {
    let json = to_canonical_json(world)?;
    std::fs::write(path, json.as_bytes()).map_err(|source| SceneIoError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_world(path: &Path) -> Result<WorldState, SceneIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneIoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| SceneIoError::Parse {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::table_world;
    use super::*;

    #[test]
    fn roundtrip_is_byte_identical() {
        let w = table_world();
        let once = to_canonical_json(&w).unwrap();
        let back = from_canonical_json(&once).unwrap();
        let twice = to_canonical_json(&back).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn floats_use_nine_significant_digits() {
        let w = table_world();
        let json = to_canonical_json(&w).unwrap();
        // 2.8 (wall height) must appear in exponent form with 8 decimals.
        assert!(json.contains("2.80000000e0"), "unexpected float encoding: {json}");
    }

    #[test]
    fn top_level_keys_match_contract() {
        let w = table_world();
        let json = to_canonical_json(&w).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let obj = v.as_object().unwrap();
        for key in ["room", "entities", "relations", "lights", "ambient", "t"] {
            assert!(obj.contains_key(key), "missing top-level key {key}");
        }
    }
}
