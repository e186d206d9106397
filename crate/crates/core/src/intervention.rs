//! World-state interventions: validity checking, the direct edit, and
//! dependency-aware propagation.
//!
//! An intervention runs in two stages. `apply` performs only the direct
//! edit and leaves relations unrepaired (the provisional state); `propagate`
//! restores consistency — removing or reseating supportees, rewriting
//! support edges, dropping dangling relations — and commits the time index.
//! `intervene` chains both and reports what was touched in an `EditRecord`.

use crate::geom::{penetration_depth, support_contact_ok};
use crate::math::Vec3;
use crate::scene::{
    validate_world, Entity, EntityId, EntityKind, Geometry, Light, Relation, RelationKind,
    Violation, WorldState, EPS_PENETRATION, EPS_SUPPORT,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Intervention {
    Remove { target: EntityId },
    Insert { entity: Entity, supporter: EntityId },
    Relocate { target: EntityId, new_center: Vec3, new_yaw: f64, new_supporter: EntityId },
    LightChange { light_index: usize, new_intensity: Vec3 },
    RemoveAllDynamic,
}

/// What happens to the supportees of a removed entity: `Cascade` removes
/// the whole supported subtree; `Reseat` drops each direct supportee onto
/// the next surface below and rewrites its support edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationPolicy {
    #[default]
    Cascade,
    Reseat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code")]
pub enum ValidityCode {
    TargetStructural { target: EntityId },
    TargetNotFound { target: String },
    PlacementInfeasible { reason: String },
    CollisionDetected { with: EntityId },
    UnsupportedAfterEdit { target: EntityId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub ok: bool,
    pub violations: Vec<ValidityCode>,
}

impl ValidityReport {
    fn from_violations(violations: Vec<ValidityCode>) -> Self {
        ValidityReport { ok: violations.is_empty(), violations }
    }
}

/// Provenance of one committed intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub intervention: Intervention,
    pub directly_edited: BTreeSet<EntityId>,
    pub propagated: BTreeSet<EntityId>,
    pub t_before: u64,
    pub t_after: u64,
}

impl EditRecord {
    /// All entities touched by the edit.
    pub fn affected(&self) -> BTreeSet<EntityId> {
        self.directly_edited.union(&self.propagated).cloned().collect()
    }

    pub fn is_removal(&self) -> bool {
        matches!(self.intervention, Intervention::Remove { .. } | Intervention::RemoveAllDynamic)
    }
}

#[derive(Debug, Error)]
pub enum InterventionError {
    #[error("intervention rejected: {0:?}")]
    Rejected(ValidityReport),
    #[error("no surface below {0} to reseat onto")]
    UnsupportedAfterEdit(EntityId),
    #[error("propagation left the world inconsistent: {0:?}")]
    PropagationFailed(Vec<Violation>),
}

/// The direct-edit output of `apply`: a world whose relations have not yet
/// been repaired, plus the context `propagate` needs to finish the job.
#[derive(Debug, Clone)]
pub struct Provisional {
    world: WorldState,
    intervention: Intervention,
    directly_edited: BTreeSet<EntityId>,
    t_before: u64,
    /// Previous pose of a relocated target (pivot for the rigid subtree move).
    old_pose: Option<(Vec3, f64)>,
}

impl Provisional {
    /// The provisional world state (relations may dangle, `t` unchanged).
    pub fn world(&self) -> &WorldState {
        &self.world
    }
}

fn geometry_center(geo: &Geometry) -> Vec3 {
    match geo {
        Geometry::Box { center, .. } | Geometry::Sphere { center, .. } => *center,
        Geometry::Quad(q) => q.center(),
    }
}

fn geometry_yaw(geo: &Geometry) -> f64 {
    match geo {
        Geometry::Box { yaw, .. } => *yaw,
        _ => 0.0,
    }
}

/// Checks whether `i` is a meaningful, geometrically feasible edit of `w`.
/// Failures come back as coded reasons, not errors.
pub fn check_validity(w: &WorldState, i: &Intervention) -> ValidityReport {
    let mut v = Vec::new();
    match i {
        Intervention::Remove { target } => match w.entity(target) {
            None => v.push(ValidityCode::TargetNotFound { target: target.to_string() }),
            Some(e) if e.is_structural() => {
                v.push(ValidityCode::TargetStructural { target: target.clone() })
            }
            Some(_) => {}
        },
        Intervention::Insert { entity, supporter } => {
            if entity.kind == EntityKind::Structural {
                v.push(ValidityCode::TargetStructural { target: entity.id.clone() });
            }
            if w.entity(&entity.id).is_some() {
                v.push(ValidityCode::PlacementInfeasible {
                    reason: format!("id {} already exists", entity.id),
                });
            }
            match w.entity(supporter) {
                None => {
                    v.push(ValidityCode::TargetNotFound { target: supporter.to_string() })
                }
                Some(s) => {
                    if !support_contact_ok(&entity.geometry, &s.geometry, EPS_SUPPORT) {
                        v.push(ValidityCode::PlacementInfeasible {
                            reason: format!("no support contact with {supporter}"),
                        });
                    }
                }
            }
            if !entity.geometry.aabb().inside(&w.room.volume()) {
                v.push(ValidityCode::PlacementInfeasible {
                    reason: "placement leaves the room volume".into(),
                });
            }
            for other in &w.entities {
                if penetration_depth(&entity.geometry, &other.geometry, 0.0) > EPS_PENETRATION {
                    v.push(ValidityCode::CollisionDetected { with: other.id.clone() });
                }
            }
        }
        Intervention::Relocate { target, new_center, new_yaw, new_supporter } => {
            let Some(e) = w.entity(target) else {
                return ValidityReport::from_violations(vec![ValidityCode::TargetNotFound {
                    target: target.to_string(),
                }]);
            };
            if e.is_structural() {
                v.push(ValidityCode::TargetStructural { target: target.clone() });
                return ValidityReport::from_violations(v);
            }
            let group = w.supported_subtree(target).expect("target exists");
            match w.entity(new_supporter) {
                None => {
                    v.push(ValidityCode::TargetNotFound { target: new_supporter.to_string() })
                }
                Some(s) => {
                    if group.contains(new_supporter) {
                        v.push(ValidityCode::PlacementInfeasible {
                            reason: "supporter would move with the target".into(),
                        });
                    } else {
                        let moved = moved_geometry(&e.geometry, e, *new_center, *new_yaw);
                        if !support_contact_ok(&moved, &s.geometry, EPS_SUPPORT) {
                            v.push(ValidityCode::PlacementInfeasible {
                                reason: format!("no support contact with {new_supporter}"),
                            });
                        }
                    }
                }
            }
            // Collision and containment for the whole rigid group.
            let pivot = geometry_center(&e.geometry);
            let delta_yaw = new_yaw - geometry_yaw(&e.geometry);
            for member in &w.entities {
                if !group.contains(&member.id) {
                    continue;
                }
                let moved =
                    member.geometry.rigid_transformed(pivot, delta_yaw, *new_center);
                if !moved.aabb().inside(&w.room.volume()) {
                    v.push(ValidityCode::PlacementInfeasible {
                        reason: format!("{} leaves the room volume", member.id),
                    });
                }
                for other in &w.entities {
                    if group.contains(&other.id) {
                        continue;
                    }
                    if penetration_depth(&moved, &other.geometry, 0.0) > EPS_PENETRATION {
                        v.push(ValidityCode::CollisionDetected { with: other.id.clone() });
                    }
                }
            }
        }
        Intervention::LightChange { light_index, new_intensity } => {
            if *light_index >= w.lights.len() {
                v.push(ValidityCode::TargetNotFound {
                    target: format!("light {light_index}"),
                });
            }
            if new_intensity.min_component() < 0.0 || !new_intensity.is_finite() {
                v.push(ValidityCode::PlacementInfeasible {
                    reason: "light intensity must be non-negative".into(),
                });
            }
        }
        Intervention::RemoveAllDynamic => {}
    }
    ValidityReport::from_violations(v)
}

fn moved_geometry(geo: &Geometry, e: &Entity, new_center: Vec3, new_yaw: f64) -> Geometry {
    let _ = e;
    let pivot = geometry_center(geo);
    let delta_yaw = new_yaw - geometry_yaw(geo);
    geo.rigid_transformed(pivot, delta_yaw, new_center)
}

/// Performs the direct edit only. Relations are not repaired and the time
/// index does not advance; feed the result to `propagate`.
pub fn apply(w: &WorldState, i: &Intervention) -> Result<Provisional, InterventionError> {
    let report = check_validity(w, i);
    if !report.ok {
        return Err(InterventionError::Rejected(report));
    }
    let mut world = w.clone();
    let mut directly = BTreeSet::new();
    let mut old_pose = None;
    match i {
        Intervention::Remove { target } => {
            world.entities.retain(|e| &e.id != target);
            directly.insert(target.clone());
        }
        Intervention::Insert { entity, .. } => {
            directly.insert(entity.id.clone());
            world.entities.push(entity.clone());
        }
        Intervention::Relocate { target, new_center, new_yaw, .. } => {
            let e = world.entity_mut(target).expect("validated");
            old_pose = Some((geometry_center(&e.geometry), geometry_yaw(&e.geometry)));
            e.geometry = moved_geometry(&e.geometry.clone(), e, *new_center, *new_yaw);
            directly.insert(target.clone());
        }
        Intervention::LightChange { light_index, new_intensity } => {
            match &mut world.lights[*light_index] {
                Light::Point { intensity, .. } => *intensity = *new_intensity,
                Light::Area { radiance, .. } => *radiance = *new_intensity,
            }
        }
        Intervention::RemoveAllDynamic => {
            for e in world.entities.iter().filter(|e| e.is_dynamic()) {
                directly.insert(e.id.clone());
            }
            world.entities.retain(|e| e.is_structural());
        }
    }
    Ok(Provisional {
        world,
        intervention: i.clone(),
        directly_edited: directly,
        t_before: w.t,
        old_pose,
    })
}

/// Restores relational and geometric consistency after a direct edit and
/// advances the time index. The result always passes `validate_world`.
pub fn propagate(
    prov: Provisional,
    policy: PropagationPolicy,
) -> Result<(WorldState, EditRecord), InterventionError> {
    let Provisional { mut world, intervention, directly_edited, t_before, old_pose } = prov;
    let mut propagated: BTreeSet<EntityId> = BTreeSet::new();

    match &intervention {
        Intervention::Remove { target } => match policy {
            PropagationPolicy::Cascade => {
                // The target is already gone, but its outgoing edges remain
                // in the provisional relation set, so reachability still
                // finds everything that rested on it.
                let mut subtree = subtree_over_relations(&world.relations, target);
                subtree.remove(target);
                world.entities.retain(|e| !subtree.contains(&e.id));
                propagated = subtree;
            }
            PropagationPolicy::Reseat => {
                let supportees: Vec<EntityId> = world
                    .relations
                    .iter()
                    .filter(|r| r.kind == RelationKind::Supports && &r.from == target)
                    .map(|r| r.to.clone())
                    .filter(|id| world.entity(id).is_some())
                    .collect();
                for id in supportees {
                    reseat(&mut world, &id)?;
                    propagated.insert(id);
                }
            }
        },
        Intervention::Insert { entity, supporter } => {
            world.relations.push(Relation {
                kind: RelationKind::Supports,
                from: supporter.clone(),
                to: entity.id.clone(),
            });
        }
        Intervention::Relocate { target, new_center, new_yaw, new_supporter } => {
            let (old_center, old_yaw) = old_pose.expect("set by apply");
            let delta_yaw = new_yaw - old_yaw;
            // Carry the supported subtree rigidly with the target.
            let mut group = subtree_over_relations(&world.relations, target);
            group.remove(target);
            for e in world.entities.iter_mut() {
                if group.contains(&e.id) {
                    e.geometry = e.geometry.rigid_transformed(old_center, delta_yaw, *new_center);
                }
            }
            propagated = group;
            // Rewrite the target's incoming support edges to the new supporter.
            world
                .relations
                .retain(|r| !(r.kind == RelationKind::Supports && &r.to == target));
            world.relations.push(Relation {
                kind: RelationKind::Supports,
                from: new_supporter.clone(),
                to: target.clone(),
            });
        }
        Intervention::LightChange { .. } | Intervention::RemoveAllDynamic => {}
    }

    // Drop relations incident to removed entities.
    let ids: BTreeSet<&EntityId> = world.entities.iter().map(|e| &e.id).collect();
    world.relations.retain(|r| ids.contains(&r.from) && ids.contains(&r.to));

    world.t = t_before + 1;

    let violations = validate_world(&world);
    if !violations.is_empty() {
        return Err(InterventionError::PropagationFailed(violations));
    }
    let record = EditRecord {
        intervention,
        directly_edited,
        propagated,
        t_before,
        t_after: t_before + 1,
    };
    Ok((world, record))
}

/// Validity check, direct edit, and propagation in one step.
pub fn intervene(
    w: &WorldState,
    i: &Intervention,
    policy: PropagationPolicy,
) -> Result<(WorldState, EditRecord), InterventionError> {
    propagate(apply(w, i)?, policy)
}

fn subtree_over_relations(relations: &[Relation], root: &EntityId) -> BTreeSet<EntityId> {
    let mut seen = BTreeSet::new();
    let mut frontier = vec![root.clone()];
    while let Some(cur) = frontier.pop() {
        if !seen.insert(cur.clone()) {
            continue;
        }
        for r in relations {
            if r.kind == RelationKind::Supports && r.from == cur && !seen.contains(&r.to) {
                frontier.push(r.to.clone());
            }
        }
    }
    seen
}

/// Drops `id` vertically onto the highest upward-facing surface below it
/// and rewrites its support edge.
fn reseat(world: &mut WorldState, id: &EntityId) -> Result<(), InterventionError> {
    let entity = world.entity(id).expect("reseat target exists").clone();
    let bottom = entity.geometry.bottom_z();
    let own_aabb = entity.geometry.aabb();

    let mut best: Option<(f64, EntityId)> = None;
    for other in &world.entities {
        if &other.id == id {
            continue;
        }
        let top = other.geometry.top_z();
        if top > bottom + EPS_SUPPORT {
            continue;
        }
        if own_aabb.xy_overlap_area(&other.geometry.aabb()) <= 0.0 {
            let c = own_aabb.center();
            if !crate::geom::point_in_top_footprint(&other.geometry, c.x, c.y) {
                continue;
            }
        }
        if best.as_ref().map_or(true, |(z, _)| top > *z) {
            best = Some((top, other.id.clone()));
        }
    }
    let Some((surface_z, supporter)) = best else {
        return Err(InterventionError::UnsupportedAfterEdit(id.clone()));
    };

    let drop = bottom - surface_z;
    let e = world.entity_mut(id).expect("exists");
    let center = geometry_center(&e.geometry);
    e.geometry = e.geometry.rigid_transformed(center, 0.0, center - Vec3::new(0.0, 0.0, drop));

    world.relations.retain(|r| !(r.kind == RelationKind::Supports && &r.to == id));
    world.relations.push(Relation {
        kind: RelationKind::Supports,
        from: supporter,
        to: id.clone(),
    });
    Ok(())
}
