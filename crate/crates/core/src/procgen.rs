//! Deterministic procedural generator for toy indoor worlds.
//!
//! `generate_room` is a pure function of `(config, index)`: every sample is
//! drawn from a ChaCha8 stream seeded by mixing the two, so regenerating a
//! corpus reproduces identical scene files byte for byte.

use crate::math::{mix_parts, Vec3};
use crate::scene::{
    self, new_world, to_canonical_json, validate_world, Entity, EntityId, EntityKind, Geometry,
    Light, Material, Quad, Relation, RelationKind, RoomSpec, WorldState, COLOR_PALETTE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

const TAG_ROOM: u64 = 0x524f4f4d; // "ROOM"
const TAG_UUID_HI: u64 = 0x55554944_4849; // "UUIDHI"
const TAG_UUID_LO: u64 = 0x55554944_4c4f; // "UUIDLO"

/// Attempts per item before the generator gives up on a placement.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 1000;

/// Fixed sample budget stamped into generated area lights.
pub const AREA_LIGHT_SAMPLES: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub furniture_count_range: [u32; 2],
    pub small_object_range: [u32; 2],
    pub room_size_range: [f64; 2],
    pub light_count_range: [u32; 2],
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            furniture_count_range: [3, 5],
            small_object_range: [3, 6],
            room_size_range: [3.5, 5.5],
            light_count_range: [1, 3],
        }
    }
}

impl GenConfig {
    pub fn check(&self) -> Result<(), ProcgenError> {
        let ordered = |r: [u32; 2]| r[0] <= r[1];
        if !ordered(self.furniture_count_range)
            || !ordered(self.small_object_range)
            || !ordered(self.light_count_range)
        {
            return Err(ProcgenError::InvalidConfig("count ranges must satisfy min <= max".into()));
        }
        if !(self.room_size_range[0] > 0.5 && self.room_size_range[0] <= self.room_size_range[1]) {
            return Err(ProcgenError::InvalidConfig("room_size_range must be positive and ordered".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProcgenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("placement exhausted for {class} after {attempts} attempts (room too crowded)")]
    PlacementExhausted { class: String, attempts: u32 },
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] scene::SceneIoError),
}

/// Deterministic room key for `(seed, index)`.
pub fn room_uuid(seed: u64, index: u64) -> String {
    format!(
        "room-{:016x}{:016x}",
        mix_parts(&[seed, index, TAG_UUID_HI]),
        mix_parts(&[seed, index, TAG_UUID_LO])
    )
}

struct Placer<'a> {
    rng: &'a mut ChaCha8Rng,
    /// Collision proxies of everything already placed on the floor.
    proxies: Vec<Geometry>,
    room_min: Vec3,
    room_max: Vec3,
}

impl Placer<'_> {
    /// Rejection-samples a floor pose for a proxy of the given half extents.
    /// Returns (center_xy, yaw).
    fn place_on_floor(
        &mut self,
        class: &str,
        half: Vec3,
        want_yaw: bool,
    ) -> Result<(f64, f64, f64), ProcgenError> {
        let radius = half.x.hypot(half.y);
        let margin = 0.03;
        let lo_x = self.room_min.x + radius + margin;
        let hi_x = self.room_max.x - radius - margin;
        let lo_y = self.room_min.y + radius + margin;
        let hi_y = self.room_max.y - radius - margin;
        if lo_x >= hi_x || lo_y >= hi_y {
            return Err(ProcgenError::PlacementExhausted {
                class: class.into(),
                attempts: 0,
            });
        }
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let x = self.rng.random_range(lo_x..hi_x);
            let y = self.rng.random_range(lo_y..hi_y);
            let yaw = if want_yaw {
                self.rng.random_range(0.0..std::f64::consts::TAU)
            } else {
                0.0
            };
            let proxy = Geometry::Box { center: Vec3::new(x, y, half.z), half_extents: half, yaw };
            let clear = self
                .proxies
                .iter()
                .all(|p| crate::geom::penetration_depth(&proxy, p, 0.025) <= 0.0);
            if clear {
                self.proxies.push(proxy);
                return Ok((x, y, yaw));
            }
        }
        Err(ProcgenError::PlacementExhausted {
            class: class.into(),
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })
    }
}

fn sample_albedo(rng: &mut ChaCha8Rng) -> Vec3 {
    let (_, anchor) = COLOR_PALETTE[rng.random_range(0..COLOR_PALETTE.len())];
    let jitter = Vec3::new(
        rng.random_range(-0.04..0.04),
        rng.random_range(-0.04..0.04),
        rng.random_range(-0.04..0.04),
    );
    (anchor + jitter).clamp01()
}

/// Generates one collision-free, fully grounded world. Pure in
/// `(cfg, index)`.
pub fn generate_room(cfg: &GenConfig, index: u64) -> Result<WorldState, ProcgenError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_parts(&[cfg.seed, index, TAG_ROOM]));

    let xs = rng.random_range(cfg.room_size_range[0]..=cfg.room_size_range[1]);
    let ys = rng.random_range(cfg.room_size_range[0]..=cfg.room_size_range[1]);
    let wall_height = rng.random_range(2.6..3.2);
    let room = RoomSpec {
        room_uuid: room_uuid(cfg.seed, index),
        floor_rect: Quad {
            origin: Vec3::ZERO,
            edge_u: Vec3::new(xs, 0.0, 0.0),
            edge_v: Vec3::new(0.0, ys, 0.0),
        },
        wall_height,
    };
    let ambient_level = rng.random_range(0.025..0.06);
    let mut world = new_world(room, Vec3::splat(ambient_level))
        .map_err(|e| ProcgenError::InvalidConfig(e.to_string()))?;

    // Close the room with a ceiling so that every camera ray terminates and
    // instance maps cover the full frame.
    world.entities.push(Entity {
        id: EntityId::new("ceiling"),
        class: "ceiling".into(),
        kind: EntityKind::Structural,
        geometry: Geometry::Quad(Quad {
            origin: Vec3::new(0.0, 0.0, wall_height),
            edge_u: Vec3::new(0.0, ys, 0.0),
            edge_v: Vec3::new(xs, 0.0, 0.0),
        }),
        material: Material::diffuse(Vec3::new(0.80, 0.79, 0.76)),
    });

    // Lights.
    let light_count =
        rng.random_range(cfg.light_count_range[0]..=cfg.light_count_range[1]);
    for _ in 0..light_count {
        let inset = (0.4f64).min(xs / 4.0).min(ys / 4.0);
        if rng.random_bool(0.5) {
            let base = rng.random_range(3.0..8.0);
            world.lights.push(Light::Point {
                position: Vec3::new(
                    rng.random_range(inset..xs - inset),
                    rng.random_range(inset..ys - inset),
                    rng.random_range(0.55 * wall_height..0.85 * wall_height),
                ),
                intensity: Vec3::new(base, base * 0.96, base * 0.88),
            });
        } else {
            let hx = rng.random_range(0.15..(0.4f64).min(xs / 4.0));
            let hy = rng.random_range(0.15..(0.4f64).min(ys / 4.0));
            let cx = rng.random_range(inset + hx..xs - inset - hx);
            let cy = rng.random_range(inset + hy..ys - inset - hy);
            let base = rng.random_range(1.5..4.0);
            let z = wall_height - 0.02;
            world.lights.push(Light::Area {
                // Edge order chosen so the emitting normal faces the floor.
                quad: Quad {
                    origin: Vec3::new(cx - hx, cy - hy, z),
                    edge_u: Vec3::new(0.0, 2.0 * hy, 0.0),
                    edge_v: Vec3::new(2.0 * hx, 0.0, 0.0),
                },
                radiance: Vec3::new(base, base * 0.97, base * 0.92),
                sample_count: AREA_LIGHT_SAMPLES,
            });
        }
    }

    // Furniture.
    let furniture_count =
        rng.random_range(cfg.furniture_count_range[0]..=cfg.furniture_count_range[1]);
    let small_count =
        rng.random_range(cfg.small_object_range[0]..=cfg.small_object_range[1]);
    if small_count > 0 && furniture_count == 0 {
        return Err(ProcgenError::PlacementExhausted {
            class: "small object (no furniture allowed)".into(),
            attempts: 0,
        });
    }

    let mut placer = Placer {
        rng: &mut rng,
        proxies: Vec::new(),
        room_min: Vec3::ZERO,
        room_max: Vec3::new(xs, ys, wall_height),
    };
    // Table tops available for small objects: (id, center, half, yaw, top_z).
    let mut tables: Vec<(EntityId, Vec3, Vec3, f64, f64)> = Vec::new();
    let mut entities = Vec::new();
    let mut relations = Vec::new();

    for fi in 0..furniture_count {
        // Guarantee a table whenever small objects are requested.
        let kind_roll =
            if fi == 0 && small_count > 0 { 0.0 } else { placer.rng.random_range(0.0..1.0) };
        if kind_roll < 0.4 {
            // Table: top box on four legs.
            let hx = placer.rng.random_range(0.35..0.65);
            let hy = placer.rng.random_range(0.25..0.45);
            let height = placer.rng.random_range(0.65..0.78);
            let albedo = sample_albedo(placer.rng);
            let (x, y, yaw) =
                placer.place_on_floor("table", Vec3::new(hx, hy, height / 2.0), true)?;
            let top_half_z = 0.02;
            let top_id = EntityId::new(format!("table{fi:02}_top"));
            let leg_half = Vec3::new(0.025, 0.025, (height - 2.0 * top_half_z) / 2.0);
            let material = Material::diffuse(albedo);
            entities.push(Entity {
                id: top_id.clone(),
                class: "table".into(),
                kind: EntityKind::Dynamic,
                geometry: Geometry::Box {
                    center: Vec3::new(x, y, height - top_half_z),
                    half_extents: Vec3::new(hx, hy, top_half_z),
                    yaw,
                },
                material,
            });
            for (li, (sx, sy)) in
                [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].iter().enumerate()
            {
                let leg_id = EntityId::new(format!("table{fi:02}_leg{li}"));
                let local =
                    Vec3::new(sx * (hx - 0.06), sy * (hy - 0.06), 0.0).rotated_z(yaw);
                entities.push(Entity {
                    id: leg_id.clone(),
                    class: "table_leg".into(),
                    kind: EntityKind::Dynamic,
                    geometry: Geometry::Box {
                        center: Vec3::new(x + local.x, y + local.y, leg_half.z),
                        half_extents: leg_half,
                        yaw,
                    },
                    material,
                });
                relations.push(Relation {
                    kind: RelationKind::Supports,
                    from: EntityId::new("floor"),
                    to: leg_id.clone(),
                });
                relations.push(Relation {
                    kind: RelationKind::Supports,
                    from: leg_id.clone(),
                    to: top_id.clone(),
                });
                relations.push(Relation {
                    kind: RelationKind::AttachedTo,
                    from: leg_id,
                    to: top_id.clone(),
                });
            }
            tables.push((top_id, Vec3::new(x, y, 0.0), Vec3::new(hx, hy, 0.0), yaw, height));
        } else if kind_roll < 0.8 {
            // Cabinet: a single box.
            let half = Vec3::new(
                placer.rng.random_range(0.2..0.4),
                placer.rng.random_range(0.15..0.3),
                placer.rng.random_range(0.3..0.6),
            );
            let albedo = sample_albedo(placer.rng);
            let (x, y, yaw) = placer.place_on_floor("cabinet", half, true)?;
            let id = EntityId::new(format!("cabinet{fi:02}"));
            entities.push(Entity {
                id: id.clone(),
                class: "cabinet".into(),
                kind: EntityKind::Dynamic,
                geometry: Geometry::Box {
                    center: Vec3::new(x, y, half.z),
                    half_extents: half,
                    yaw,
                },
                material: Material::diffuse(albedo),
            });
            relations.push(Relation {
                kind: RelationKind::Supports,
                from: EntityId::new("floor"),
                to: id,
            });
        } else {
            // Floor lamp: a sphere.
            let r = placer.rng.random_range(0.12..0.22);
            let albedo = sample_albedo(placer.rng);
            let (x, y, _) = placer.place_on_floor("lamp", Vec3::splat(r), false)?;
            let id = EntityId::new(format!("lamp{fi:02}"));
            entities.push(Entity {
                id: id.clone(),
                class: "lamp".into(),
                kind: EntityKind::Dynamic,
                geometry: Geometry::Sphere { center: Vec3::new(x, y, r), radius: r },
                material: Material::diffuse(albedo),
            });
            relations.push(Relation {
                kind: RelationKind::Supports,
                from: EntityId::new("floor"),
                to: id,
            });
        }
    }

    // Small objects on table tops.
    let mut placed_smalls: Vec<Geometry> = Vec::new();
    for si in 0..small_count {
        let class_roll = placer.rng.random_range(0..5);
        let (class, half, is_sphere) = match class_roll {
            0 => ("cup", Vec3::new(0.035, 0.035, 0.05), false),
            1 => ("bowl", Vec3::new(0.06, 0.06, 0.03), false),
            2 => ("book", Vec3::new(0.08, 0.055, 0.013), false),
            3 => ("box", Vec3::new(0.05, 0.05, 0.05), false),
            _ => ("ball", Vec3::splat(0.035), true),
        };
        let scale = placer.rng.random_range(0.85..1.25);
        let half = half * scale;
        let albedo = sample_albedo(placer.rng);
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let (table_id, t_center, t_half, t_yaw, top_z) =
                tables[placer.rng.random_range(0..tables.len())].clone();
            let radius = half.x.hypot(half.y);
            let lim_x = t_half.x - radius - 0.015;
            let lim_y = t_half.y - radius - 0.015;
            if lim_x <= 0.0 || lim_y <= 0.0 {
                continue;
            }
            let lu = placer.rng.random_range(-lim_x..lim_x);
            let lv = placer.rng.random_range(-lim_y..lim_y);
            let yaw = placer.rng.random_range(0.0..std::f64::consts::TAU);
            let world_xy = t_center + Vec3::new(lu, lv, 0.0).rotated_z(t_yaw);
            let geometry = if is_sphere {
                Geometry::Sphere {
                    center: Vec3::new(world_xy.x, world_xy.y, top_z + half.x),
                    radius: half.x,
                }
            } else {
                Geometry::Box {
                    center: Vec3::new(world_xy.x, world_xy.y, top_z + half.z),
                    half_extents: half,
                    yaw: yaw + t_yaw,
                }
            };
            let clear = placed_smalls
                .iter()
                .all(|p| crate::geom::penetration_depth(&geometry, p, 0.0025) <= 0.0);
            if !clear {
                continue;
            }
            let id = EntityId::new(format!("{class}{si:02}"));
            entities.push(Entity {
                id: id.clone(),
                class: class.into(),
                kind: EntityKind::Dynamic,
                geometry: geometry.clone(),
                material: Material::diffuse(albedo),
            });
            relations.push(Relation {
                kind: RelationKind::Supports,
                from: table_id,
                to: id,
            });
            placed_smalls.push(geometry);
            placed = true;
            break;
        }
        if !placed {
            return Err(ProcgenError::PlacementExhausted {
                class: class.into(),
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
    }

    world.entities.extend(entities);
    world.relations.extend(relations);
    debug_assert_eq!(validate_world(&world), vec![]);
    Ok(world)
}

/// Writes `n_rooms` scene files named `scene_{index:05}.json` into
/// `out_dir`. Rooms generate in parallel; output is index-ordered and
/// byte-deterministic.
pub fn generate_corpus(
    cfg: &GenConfig,
    n_rooms: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ProcgenError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ProcgenError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    (0..n_rooms)
        .into_par_iter()
        .map(|index| {
            let world = generate_room(cfg, index)?;
            let path = out_dir.join(format!("scene_{index:05}.json"));
            let json = to_canonical_json(&world)?;
            std::fs::write(&path, json.as_bytes()).map_err(|source| ProcgenError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}
