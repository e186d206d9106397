use super::*;
use crate::cameras::CameraTier;
use crate::procgen::{generate_corpus, GenConfig};
use crate::render::render_full;
use std::collections::BTreeSet;

fn small_cfg() -> AssembleConfig {
    let mut cfg = AssembleConfig::default();
    cfg.camera.width = 64;
    cfg.camera.height = 48;
    cfg
}

fn tiny_corpus(dir: &Path, n: u64) -> Vec<PathBuf> {
    let gen = GenConfig { furniture_count_range: [2, 3], small_object_range: [1, 2], ..GenConfig::default() };
    generate_corpus(&gen, n, dir).unwrap()
}

#[test]
fn removal_dataset_roundtrips_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 2);
    let out = dir.path().join("out");
    let m = build_removal_dataset(&scenes, &small_cfg(), 7, &out).unwrap();
    assert!(!m.records.is_empty());
    for r in &m.records {
        assert!(r.mask_area_fraction > 0.003);
        assert_eq!(r.camera_tier, CameraTier::BaseCamera);
        assert!(out.join(&r.paths.orig).exists());
        assert!(r.paths.amodal.is_some());
        assert!(!r.text_label.is_empty());
    }
    let violations = validate_manifest(&m, &out);
    assert_eq!(violations, vec![], "fresh manifest must be self-consistent");

    let back = read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(back, m);
}

#[test]
fn rebuilds_are_byte_identical_across_runs_and_pools() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 2);
    let cfg = small_cfg();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| build_removal_dataset(&scenes, &cfg, 3, &out_a).unwrap());
    rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| build_removal_dataset(&scenes, &cfg, 3, &out_b).unwrap());
    let bytes_a = std::fs::read(out_a.join("manifest.jsonl")).unwrap();
    let bytes_b = std::fs::read(out_b.join("manifest.jsonl")).unwrap();
    assert_eq!(bytes_a, bytes_b, "manifests differ across worker counts");

    let m = read_manifest(&out_a.join("manifest.jsonl")).unwrap();
    for r in m.records.iter().take(3) {
        for rel in [&r.paths.orig, &r.paths.mask, &r.paths.target] {
            assert_eq!(
                std::fs::read(out_a.join(rel)).unwrap(),
                std::fs::read(out_b.join(rel)).unwrap(),
                "image bytes differ for {rel}"
            );
        }
    }
}

#[test]
fn strict_mask_filter_drops_everything() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 1);
    let mut cfg = small_cfg();
    cfg.min_mask = 0.999;
    let m = build_removal_dataset(&scenes, &cfg, 7, &dir.path().join("out")).unwrap();
    assert!(m.records.is_empty());
}

#[test]
fn multiview_groups_share_states_and_partition_tiers() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 1);
    let mut cfg = small_cfg();
    cfg.n_similar = 2;
    cfg.n_diff = 2;
    let out = dir.path().join("out");
    let m = build_multiview_dataset(&scenes, &cfg, 5, &out).unwrap();
    assert!(!m.records.is_empty());

    let mut groups: BTreeMap<(&str, &str), Vec<&TripletRecord>> = BTreeMap::new();
    for r in &m.records {
        groups.entry((r.scene_path.as_str(), r.object_id.as_str())).or_default().push(r);
    }
    let mut tier_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for ((_, object), views) in &groups {
        assert!(views.len() <= 1 + 2 + 2);
        // Every view of a group references the same shared edited state.
        let after_path =
            out.join("edits").join(&views[0].room_uuid).join(format!("{object}.after.json"));
        assert!(after_path.exists(), "shared edited scene missing for {object}");
        for v in views {
            *tier_counts.entry(v.camera_tier_str()).or_default() += 1;
            assert_eq!(v.room_uuid, views[0].room_uuid);
        }
    }
    let total: usize = tier_counts.values().sum();
    assert_eq!(total, m.records.len(), "tiers partition the record set");
    assert!(tier_counts.contains_key("base_camera"));
}

impl TripletRecord {
    fn camera_tier_str(&self) -> &'static str {
        self.camera_tier.as_str()
    }
}

#[test]
fn scene_removal_targets_only_structure() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 2);
    let out = dir.path().join("out");
    let m = build_scene_removal_dataset(&scenes, &small_cfg(), 9, &out).unwrap();
    assert!(m.records.len() <= scenes.len());
    for r in &m.records {
        assert_eq!(r.object_id, "ALL");
        // Re-render the shared edited state: every visible instance must be
        // structural.
        let after_path = out.join("edits").join(&r.room_uuid).join("ALL.after.json");
        let after = crate::scene::load_world(&after_path).unwrap();
        assert!(after.entities.iter().all(|e| e.is_structural()));
        let cam_cfg = small_cfg();
        let cams = sample_cameras(
            &crate::scene::load_world(Path::new(&r.scene_path)).unwrap(),
            &EntityId::new(
                crate::scene::load_world(Path::new(&r.scene_path))
                    .unwrap()
                    .dynamic_entities()
                    .next()
                    .unwrap()
                    .id
                    .as_str(),
            ),
            0,
            0,
            1,
            &cam_cfg.camera,
        )
        .unwrap();
        let pass = render_full(&after, &cams[0].camera, &cam_cfg.render).unwrap();
        let structural: BTreeSet<EntityId> = after.structural_ids();
        for idx in pass.instance.pixels() {
            assert!(structural.contains(&pass.entity_index[*idx as usize]));
        }
    }
}

#[test]
fn split_by_room_is_disjoint_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 4);
    let m = build_removal_dataset(&scenes, &small_cfg(), 7, &dir.path().join("out")).unwrap();
    let a = split_by_room(&m, 0.25, 13).unwrap();
    let b = split_by_room(&m, 0.25, 13).unwrap();
    assert_eq!(a, b);
    let test_rooms: BTreeSet<&str> = a
        .records
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| r.room_uuid.as_str())
        .collect();
    let train_rooms: BTreeSet<&str> = a
        .records
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| r.room_uuid.as_str())
        .collect();
    assert!(!test_rooms.is_empty() && !train_rooms.is_empty());
    assert!(test_rooms.is_disjoint(&train_rooms));
    // Share reached the requested fraction.
    let test_count = a.records.iter().filter(|r| r.split == Split::Test).count();
    assert!(test_count as f64 / a.records.len() as f64 >= 0.25);
}

#[test]
fn single_room_split_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 1);
    let m = build_removal_dataset(&scenes, &small_cfg(), 7, &dir.path().join("out")).unwrap();
    assert!(matches!(
        split_by_room(&m, 0.2, 1),
        Err(AssembleError::DegenerateSplit(_))
    ));
}

#[test]
fn stats_match_published_arithmetic() {
    let s = StatsReport::from_counts(2369, 2369, 25_688);
    assert_eq!(s.items_per_scene, 10.84);
    let m = StatsReport::from_counts(517, 2772, 34_865);
    assert_eq!(m.items_per_scene, 12.58);
    let empty = StatsReport::from_counts(0, 0, 0);
    assert_eq!(empty.items_per_scene, 0.0);
    assert!(empty.items_per_scene_undefined);
}

#[test]
fn stats_over_a_real_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 2);
    let m = build_removal_dataset(&scenes, &small_cfg(), 7, &dir.path().join("out")).unwrap();
    let s = stats(&m);
    assert_eq!(s.images_or_layers, m.records.len() as u64);
    assert_eq!(s.unique_rooms, 2);
    assert!(!s.items_per_scene_undefined);
}

#[test]
fn validate_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 1);
    let out = dir.path().join("out");
    let mut m = build_removal_dataset(&scenes, &small_cfg(), 7, &out).unwrap();
    assert!(!m.records.is_empty());
    assert_eq!(validate_manifest(&m, &out), vec![]);

    // Hand-edited mask fraction.
    let original = m.records[0].mask_area_fraction;
    m.records[0].mask_area_fraction = original + 0.01;
    let v = validate_manifest(&m, &out);
    assert!(v.iter().any(|x| matches!(x, ManifestViolation::MaskAreaMismatch { .. })), "{v:?}");
    m.records[0].mask_area_fraction = original;

    // Deleted mask file.
    let mask_path = out.join(&m.records[0].paths.mask);
    let saved = std::fs::read(&mask_path).unwrap();
    std::fs::remove_file(&mask_path).unwrap();
    let v = validate_manifest(&m, &out);
    assert!(v.iter().any(|x| matches!(x, ManifestViolation::MissingFile { .. })));
    std::fs::write(&mask_path, &saved).unwrap();

    // Corrupted bytes with a stale hash.
    let orig_path = out.join(&m.records[0].paths.orig);
    let mut bytes = std::fs::read(&orig_path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    std::fs::write(&orig_path, &bytes).unwrap();
    let v = validate_manifest(&m, &out);
    assert!(v.iter().any(|x| matches!(x, ManifestViolation::HashMismatch { .. })), "{v:?}");
}

#[test]
fn validate_flags_below_threshold_records() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = tiny_corpus(&dir.path().join("scenes"), 1);
    let out = dir.path().join("out");
    let mut m = build_removal_dataset(&scenes, &small_cfg(), 7, &out).unwrap();
    m.records[0].mask_area_fraction = 0.001;
    let v = validate_manifest(&m, &out);
    assert!(v.iter().any(|x| matches!(x, ManifestViolation::BelowMinMask { .. })));
}
