//! scenelab: editable toy indoor worlds for intervention-consistent
//! supervision.
//!
//! The engine builds procedural room scenes as persistent world states,
//! applies validity-checked interventions (remove / insert / relocate /
//! light edits) with dependency-aware propagation, renders aligned
//! multi-pass images from protocol-checked cameras, and assembles filtered
//! counterfactual datasets with room-disjoint splits. Every stage is
//! deterministic: fixed seeds reproduce scene files, renders, and manifests
//! byte for byte, regardless of worker count.

pub mod assemble;
pub mod cameras;
pub mod geom;
pub mod image;
pub mod imageio;
pub mod intervention;
pub mod math;
pub mod metrics;
pub mod procgen;
pub mod render;
pub mod scene;
