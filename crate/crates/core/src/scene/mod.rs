//! Persistent world state: entities, relations, lights, and the structural
//! room shell, plus the queries every other module reads.
//!
//! A `WorldState` is immutable once committed: interventions produce new
//! states (see the `intervention` module), so read-only queries can run
//! concurrently on shared references.

mod io;
mod validate;

pub use io::{from_canonical_json, load_world, save_world, to_canonical_json, SceneIoError};
pub use validate::{validate_world, Violation, EPS_PENETRATION, EPS_SUPPORT};

use crate::math::{Aabb, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("entity not found: {0}")]
    TargetNotFound(EntityId),
    #[error("entity is structural: {0}")]
    TargetStructural(EntityId),
}

/// Opaque, world-unique entity identifier. Removed ids are never reused.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(s: impl Into<String>) -> Self {
        EntityId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for EntityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Planar parallelogram patch: `origin` plus the span of `edge_u`/`edge_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub origin: Vec3,
    pub edge_u: Vec3,
    pub edge_v: Vec3,
}

impl Quad {
    pub fn corners(&self) -> [Vec3; 4] {
        [
            self.origin,
            self.origin + self.edge_u,
            self.origin + self.edge_u + self.edge_v,
            self.origin + self.edge_v,
        ]
    }

    pub fn center(&self) -> Vec3 {
        self.origin + (self.edge_u + self.edge_v) * 0.5
    }

    /// Unit normal `edge_u x edge_v` (orientation follows the edge order).
    pub fn normal(&self) -> Vec3 {
        self.edge_u.cross(self.edge_v).normalized()
    }

    pub fn area(&self) -> f64 {
        self.edge_u.cross(self.edge_v).length()
    }
}

/// Geometric substrate: yaw-rotated boxes, spheres, and quads. Exact
/// primitive intersection keeps every rendering identity testable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    Box { center: Vec3, half_extents: Vec3, yaw: f64 },
    Sphere { center: Vec3, radius: f64 },
    Quad(Quad),
}

impl Geometry {
    /// Tight world-space bounds.
    pub fn aabb(&self) -> Aabb {
        match self {
            Geometry::Box { center, half_extents, yaw } => {
                let h = *half_extents;
                let corners = [
                    Vec3::new(-h.x, -h.y, -h.z),
                    Vec3::new(h.x, -h.y, -h.z),
                    Vec3::new(-h.x, h.y, -h.z),
                    Vec3::new(h.x, h.y, -h.z),
                    Vec3::new(-h.x, -h.y, h.z),
                    Vec3::new(h.x, -h.y, h.z),
                    Vec3::new(-h.x, h.y, h.z),
                    Vec3::new(h.x, h.y, h.z),
                ];
                Aabb::from_points(corners.iter().map(|c| *center + c.rotated_z(*yaw)))
            }
            Geometry::Sphere { center, radius } => {
                Aabb::new(*center - Vec3::splat(*radius), *center + Vec3::splat(*radius))
            }
            Geometry::Quad(q) => Aabb::from_points(q.corners()),
        }
    }

    /// Lowest point of the shape (the resting face for support checks).
    pub fn bottom_z(&self) -> f64 {
        self.aabb().min.z
    }

    /// Height of the upward-facing support surface.
    pub fn top_z(&self) -> f64 {
        self.aabb().max.z
    }

    /// Translate and add yaw, rotating about `pivot` (used when a supported
    /// subtree moves rigidly with its anchor).
    pub fn rigid_transformed(&self, pivot: Vec3, delta_yaw: f64, new_pivot: Vec3) -> Geometry {
        let move_point = |p: Vec3| new_pivot + (p - pivot).rotated_z(delta_yaw);
        match self {
            Geometry::Box { center, half_extents, yaw } => Geometry::Box {
                center: move_point(*center),
                half_extents: *half_extents,
                yaw: yaw + delta_yaw,
            },
            Geometry::Sphere { center, radius } => {
                Geometry::Sphere { center: move_point(*center), radius: *radius }
            }
            Geometry::Quad(q) => Geometry::Quad(Quad {
                origin: move_point(q.origin),
                edge_u: q.edge_u.rotated_z(delta_yaw),
                edge_v: q.edge_v.rotated_z(delta_yaw),
            }),
        }
    }
}

/// Lambertian albedo plus an optional mirror component. At shading time the
/// diffuse term is scaled by `1 - mirror_reflectance` so the material stays
/// energy-conserving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: Vec3,
    pub mirror_reflectance: f64,
}

impl Material {
    pub fn diffuse(albedo: Vec3) -> Self {
        Material { albedo, mirror_reflectance: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Structural,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub class: String,
    pub kind: EntityKind,
    pub geometry: Geometry,
    pub material: Material,
}

impl Entity {
    pub fn is_structural(&self) -> bool {
        self.kind == EntityKind::Structural
    }

    pub fn is_dynamic(&self) -> bool {
        self.kind == EntityKind::Dynamic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Supports,
    AttachedTo,
    Contains,
}

/// Directed relation edge. For `Supports`, `from` is the supporter and `to`
/// rests on it; the supports graph must stay acyclic and ground every
/// dynamic entity in a structural one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub from: EntityId,
    pub to: EntityId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Light {
    Point { position: Vec3, intensity: Vec3 },
    Area { quad: Quad, radiance: Vec3, sample_count: u32 },
}

/// Room shell parameters. `floor_rect` must be an axis-aligned rectangle in
/// the z=0 plane; walls enclose `floor_rect x [0, wall_height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub room_uuid: String,
    pub floor_rect: Quad,
    pub wall_height: f64,
}

impl RoomSpec {
    /// Validates the axis-aligned convex-volume invariant.
    pub fn check(&self) -> Result<(), SceneError> {
        let u = self.floor_rect.edge_u;
        let v = self.floor_rect.edge_v;
        let o = self.floor_rect.origin;
        if !(u.x > 0.0 && u.y == 0.0 && u.z == 0.0) {
            return Err(SceneError::InvalidRoom("floor edge_u must be +x aligned".into()));
        }
        if !(v.y > 0.0 && v.x == 0.0 && v.z == 0.0) {
            return Err(SceneError::InvalidRoom("floor edge_v must be +y aligned".into()));
        }
        if o.z != 0.0 {
            return Err(SceneError::InvalidRoom("floor must lie in the z=0 plane".into()));
        }
        if !(self.wall_height > 0.0) {
            return Err(SceneError::InvalidRoom("wall_height must be positive".into()));
        }
        Ok(())
    }

    /// Interior volume of the room.
    pub fn volume(&self) -> Aabb {
        let o = self.floor_rect.origin;
        Aabb::new(
            o,
            o + Vec3::new(self.floor_rect.edge_u.x, self.floor_rect.edge_v.y, self.wall_height),
        )
    }
}

/// The persistent scene container. `t` counts committed interventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub room: RoomSpec,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub lights: Vec<Light>,
    pub ambient: Vec3,
    pub t: u64,
}

/// Builds a world containing only the structural shell derived from `room`:
/// the floor and four walls, t = 0, no dynamic entities.
pub fn new_world(room: RoomSpec, ambient: Vec3) -> Result<WorldState, SceneError> {
    room.check()?;
    let o = room.floor_rect.origin;
    let xs = room.floor_rect.edge_u.x;
    let ys = room.floor_rect.edge_v.y;
    let h = room.wall_height;
    let shell_material = Material::diffuse(Vec3::new(0.72, 0.70, 0.66));

    let quad_entity = |id: &str, class: &str, q: Quad| Entity {
        id: EntityId::new(id),
        class: class.to_string(),
        kind: EntityKind::Structural,
        geometry: Geometry::Quad(q),
        material: shell_material,
    };

    let up = Vec3::new(0.0, 0.0, h);
    let entities = vec![
        quad_entity(
            "floor",
            "floor",
            Quad { origin: o, edge_u: Vec3::new(xs, 0.0, 0.0), edge_v: Vec3::new(0.0, ys, 0.0) },
        ),
        quad_entity(
            "wall_xneg",
            "wall",
            Quad { origin: o, edge_u: Vec3::new(0.0, ys, 0.0), edge_v: up },
        ),
        quad_entity(
            "wall_xpos",
            "wall",
            Quad {
                origin: o + Vec3::new(xs, 0.0, 0.0),
                edge_u: Vec3::new(0.0, ys, 0.0),
                edge_v: up,
            },
        ),
        quad_entity(
            "wall_yneg",
            "wall",
            Quad { origin: o, edge_u: Vec3::new(xs, 0.0, 0.0), edge_v: up },
        ),
        quad_entity(
            "wall_ypos",
            "wall",
            Quad {
                origin: o + Vec3::new(0.0, ys, 0.0),
                edge_u: Vec3::new(xs, 0.0, 0.0),
                edge_v: up,
            },
        ),
    ];

    Ok(WorldState { room, entities, relations: vec![], lights: vec![], ambient, t: 0 })
}

impl WorldState {
    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.iter().find(|e| &e.id == id)
    }

    pub fn entity_mut(&mut self, id: &EntityId) -> Option<&mut Entity> {
        self.entities.iter_mut().find(|e| &e.id == id)
    }

    pub fn entity_index(&self, id: &EntityId) -> Option<usize> {
        self.entities.iter().position(|e| &e.id == id)
    }

    pub fn dynamic_entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.is_dynamic())
    }

    pub fn structural_ids(&self) -> BTreeSet<EntityId> {
        self.entities.iter().filter(|e| e.is_structural()).map(|e| e.id.clone()).collect()
    }

    /// `id` plus everything resting on it, transitively, via `Supports`
    /// edges (supporter -> supportee).
    pub fn supported_subtree(&self, id: &EntityId) -> Result<BTreeSet<EntityId>, SceneError> {
        if self.entity(id).is_none() {
            return Err(SceneError::TargetNotFound(id.clone()));
        }
        let mut seen: BTreeSet<EntityId> = BTreeSet::new();
        let mut frontier = vec![id.clone()];
        while let Some(cur) = frontier.pop() {
            if !seen.insert(cur.clone()) {
                continue;
            }
            for r in &self.relations {
                if r.kind == RelationKind::Supports && r.from == cur && !seen.contains(&r.to) {
                    frontier.push(r.to.clone());
                }
            }
        }
        Ok(seen)
    }

    /// Tight world-space bounds of one entity.
    pub fn world_aabb(&self, id: &EntityId) -> Result<Aabb, SceneError> {
        self.entity(id)
            .map(|e| e.geometry.aabb())
            .ok_or_else(|| SceneError::TargetNotFound(id.clone()))
    }

    /// First supporter of `id` in relation order, if any.
    pub fn supporter_of(&self, id: &EntityId) -> Option<&Entity> {
        self.relations
            .iter()
            .find(|r| r.kind == RelationKind::Supports && &r.to == id)
            .and_then(|r| self.entity(&r.from))
    }

    /// Deterministic template caption for a dynamic entity:
    /// `"a {color} {class} on the {supporter class}"`.
    pub fn text_label(&self, id: &EntityId) -> Result<String, SceneError> {
        let e = self.entity(id).ok_or_else(|| SceneError::TargetNotFound(id.clone()))?;
        if e.is_structural() {
            return Err(SceneError::TargetStructural(id.clone()));
        }
        let color = nearest_color_name(e.material.albedo);
        let supporter_class =
            self.supporter_of(id).map(|s| s.class.as_str()).unwrap_or("floor");
        Ok(format!("a {} {} on the {}", color, e.class, supporter_class))
    }

    pub fn next_time_index(&self) -> u64 {
        self.t + 1
    }
}

/// Fixed 8-entry color-name palette used by the caption channel. Anchors are
/// linear RGB; ties break toward the earlier entry.
pub const COLOR_PALETTE: [(&str, Vec3); 8] = [
    ("red", Vec3::new(0.70, 0.08, 0.08)),
    ("green", Vec3::new(0.10, 0.55, 0.12)),
    ("blue", Vec3::new(0.10, 0.18, 0.65)),
    ("yellow", Vec3::new(0.85, 0.78, 0.10)),
    ("gray", Vec3::new(0.45, 0.45, 0.45)),
    ("white", Vec3::new(0.90, 0.90, 0.90)),
    ("black", Vec3::new(0.04, 0.04, 0.04)),
    ("brown", Vec3::new(0.32, 0.18, 0.07)),
];

pub fn nearest_color_name(albedo: Vec3) -> &'static str {
    let mut best = COLOR_PALETTE[0].0;
    let mut best_d = f64::INFINITY;
    for (name, anchor) in COLOR_PALETTE {
        let d = (albedo - anchor).length_squared();
        if d < best_d {
            best_d = d;
            best = name;
        }
    }
    best
}
