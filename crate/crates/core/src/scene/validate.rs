//! World-state validation. Violations are data, not errors: an empty list
//! means the world satisfies every structural and geometric invariant.

use super::{Entity, EntityId, EntityKind, Geometry, Light, RelationKind, WorldState};
use crate::geom::{penetration_depth, support_contact_ok};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Dynamic entities may interpenetrate by at most this depth (meters).
pub const EPS_PENETRATION: f64 = 1e-4;
/// A supportee's resting face must sit within this distance of its
/// supporter's top surface (meters).
pub const EPS_SUPPORT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code")]
pub enum Violation {
    InvalidRoom { reason: String },
    DuplicateEntityId { id: EntityId },
    InvalidGeometry { id: EntityId, reason: String },
    InvalidMaterial { id: EntityId },
    InvalidLight { index: usize, reason: String },
    InvalidAmbient,
    RelationEndpointMissing { from: EntityId, to: EntityId },
    SupportsCycle { witness: EntityId },
    UnsupportedDynamic { id: EntityId },
    Interpenetration { a: EntityId, b: EntityId, depth: f64 },
    SupportContactViolated { supporter: EntityId, supportee: EntityId },
}

pub fn validate_world(w: &WorldState) -> Vec<Violation> {
    let mut out = Vec::new();

    if let Err(e) = w.room.check() {
        out.push(Violation::InvalidRoom { reason: e.to_string() });
    }

    let mut seen: BTreeSet<&EntityId> = BTreeSet::new();
    for e in &w.entities {
        if !seen.insert(&e.id) {
            out.push(Violation::DuplicateEntityId { id: e.id.clone() });
        }
        check_geometry(e, &mut out);
        let a = e.material.albedo;
        let m = e.material.mirror_reflectance;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(a.x) && unit(a.y) && unit(a.z) && unit(m)) {
            out.push(Violation::InvalidMaterial { id: e.id.clone() });
        }
    }

    for (index, light) in w.lights.iter().enumerate() {
        match light {
            Light::Point { intensity, position } => {
                if intensity.min_component() < 0.0 || !intensity.is_finite() {
                    out.push(Violation::InvalidLight { index, reason: "negative intensity".into() });
                }
                if !position.is_finite() {
                    out.push(Violation::InvalidLight { index, reason: "non-finite position".into() });
                }
            }
            Light::Area { radiance, sample_count, quad } => {
                if radiance.min_component() < 0.0 || !radiance.is_finite() {
                    out.push(Violation::InvalidLight { index, reason: "negative radiance".into() });
                }
                if *sample_count == 0 {
                    out.push(Violation::InvalidLight { index, reason: "zero sample_count".into() });
                }
                if quad.area() <= 0.0 {
                    out.push(Violation::InvalidLight { index, reason: "degenerate quad".into() });
                }
            }
        }
    }

    if w.ambient.min_component() < 0.0 || !w.ambient.is_finite() {
        out.push(Violation::InvalidAmbient);
    }

    let by_id: BTreeMap<&EntityId, &Entity> = w.entities.iter().map(|e| (&e.id, e)).collect();

    for r in &w.relations {
        if !by_id.contains_key(&r.from) || !by_id.contains_key(&r.to) {
            out.push(Violation::RelationEndpointMissing { from: r.from.clone(), to: r.to.clone() });
        }
    }

    if let Some(witness) = find_supports_cycle(w) {
        out.push(Violation::SupportsCycle { witness });
    } else {
        // Grounding is only meaningful on an acyclic graph.
        let grounded = grounded_set(w, &by_id);
        for e in &w.entities {
            if e.kind == EntityKind::Dynamic && !grounded.contains(&e.id) {
                out.push(Violation::UnsupportedDynamic { id: e.id.clone() });
            }
        }
    }

    // Support contact, per edge.
    for r in &w.relations {
        if r.kind != RelationKind::Supports {
            continue;
        }
        let (Some(supporter), Some(supportee)) = (by_id.get(&r.from), by_id.get(&r.to)) else {
            continue;
        };
        if supportee.kind == EntityKind::Dynamic
            && !support_contact_ok(&supportee.geometry, &supporter.geometry, EPS_SUPPORT)
        {
            out.push(Violation::SupportContactViolated {
                supporter: r.from.clone(),
                supportee: r.to.clone(),
            });
        }
    }

    // Pairwise dynamic interpenetration.
    let dynamics: Vec<&Entity> = w.entities.iter().filter(|e| e.is_dynamic()).collect();
    for i in 0..dynamics.len() {
        for j in (i + 1)..dynamics.len() {
            let depth = penetration_depth(&dynamics[i].geometry, &dynamics[j].geometry, 0.0);
            if depth > EPS_PENETRATION {
                out.push(Violation::Interpenetration {
                    a: dynamics[i].id.clone(),
                    b: dynamics[j].id.clone(),
                    depth,
                });
            }
        }
    }

    out
}

fn check_geometry(e: &Entity, out: &mut Vec<Violation>) {
    let bad = |reason: &str, out: &mut Vec<Violation>| {
        out.push(Violation::InvalidGeometry { id: e.id.clone(), reason: reason.into() })
    };
    match &e.geometry {
        Geometry::Box { half_extents, center, yaw } => {
            if half_extents.min_component() <= 0.0 {
                bad("non-positive half extents", out);
            }
            if !center.is_finite() || !half_extents.is_finite() || !yaw.is_finite() {
                bad("non-finite box", out);
            }
        }
        Geometry::Sphere { radius, center } => {
            if *radius <= 0.0 || !radius.is_finite() || !center.is_finite() {
                bad("non-positive or non-finite radius", out);
            }
        }
        Geometry::Quad(q) => {
            if q.edge_u.cross(q.edge_v).length_squared() <= 1e-18 {
                bad("parallel quad edges", out);
            }
            if !q.origin.is_finite() || !q.edge_u.is_finite() || !q.edge_v.is_finite() {
                bad("non-finite quad", out);
            }
        }
    }
}

fn find_supports_cycle(w: &WorldState) -> Option<EntityId> {
    // Iterative DFS with white/gray/black coloring over supports edges.
    let ids: Vec<&EntityId> = w.entities.iter().map(|e| &e.id).collect();
    let mut adjacency: BTreeMap<&EntityId, Vec<&EntityId>> =
        ids.iter().map(|id| (*id, Vec::new())).collect();
    for r in &w.relations {
        if r.kind == RelationKind::Supports && adjacency.contains_key(&r.to) {
            if let Some(list) = adjacency.get_mut(&r.from) {
                list.push(&r.to);
            }
        }
    }
    let mut color: BTreeMap<&EntityId, u8> = ids.iter().map(|id| (*id, 0u8)).collect();
    for start in &ids {
        if color[*start] != 0 {
            continue;
        }
        let mut stack = vec![(*start, false)];
        while let Some((node, processed)) = stack.pop() {
            if processed {
                color.insert(node, 2);
                continue;
            }
            if color[node] == 2 {
                continue;
            }
            color.insert(node, 1);
            stack.push((node, true));
            for next in &adjacency[node] {
                match color[*next] {
                    1 => return Some((*next).clone()),
                    0 => stack.push((next, false)),
                    _ => {}
                }
            }
        }
    }
    None
}

fn grounded_set<'a>(
    w: &'a WorldState,
    by_id: &BTreeMap<&'a EntityId, &'a Entity>,
) -> BTreeSet<&'a EntityId> {
    // Fixed point: an entity is grounded if some supporter of it is
    // structural or already grounded.
    let mut grounded: BTreeSet<&EntityId> =
        w.entities.iter().filter(|e| e.is_structural()).map(|e| &e.id).collect();
    loop {
        let before = grounded.len();
        for r in &w.relations {
            if r.kind == RelationKind::Supports
                && grounded.contains(&r.from)
                && by_id.contains_key(&r.to)
            {
                if let Some((id, _)) = by_id.get_key_value(&r.to) {
                    grounded.insert(id);
                }
            }
        }
        if grounded.len() == before {
            return grounded;
        }
    }
}
