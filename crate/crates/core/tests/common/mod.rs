//! Independent brute-force oracles used by the acceptance suite. These
//! deliberately avoid the production intersection routines: spheres use the
//! closed-form segment-to-center distance, quads use plane sign changes
//! with a cross-product solve, boxes use dense point-inside sampling, and
//! frustum membership is tested through angles instead of tangent-scaled
//! projections.

use scenelab::math::{Aabb, Vec3};
use scenelab::render::CameraConfig;
use scenelab::scene::{EntityId, Geometry, WorldState};

const BOX_SAMPLES: usize = 4096;

/// True if the open segment a->b is clear of `geo` according to the oracle.
fn oracle_segment_clear_of(geo: &Geometry, a: Vec3, b: Vec3) -> bool {
    match geo {
        Geometry::Sphere { center, radius } => {
            // Closed-form minimum distance from the segment to the center.
            let ab = b - a;
            let len2 = ab.length_squared();
            let t = if len2 == 0.0 { 0.0 } else { ((*center - a).dot(ab) / len2).clamp(0.0, 1.0) };
            let nearest = a + ab * t;
            // Interior crossings only: endpoints resting on the surface are
            // not blockers.
            if t <= 1e-6 || t >= 1.0 - 1e-6 {
                return true;
            }
            nearest.distance(*center) >= *radius
        }
        Geometry::Quad(q) => {
            let n = q.edge_u.cross(q.edge_v);
            let sa = (a - q.origin).dot(n);
            let sb = (b - q.origin).dot(n);
            if sa * sb >= 0.0 {
                return true; // no plane crossing
            }
            let t = sa / (sa - sb);
            if t <= 1e-6 || t >= 1.0 - 1e-6 {
                return true;
            }
            let p = a + (b - a) * t;
            let rel = p - q.origin;
            // Cross-product route for the parallelogram coordinates.
            let n2 = n.length_squared();
            let alpha = rel.cross(q.edge_v).dot(n) / n2;
            let beta = q.edge_u.cross(rel).dot(n) / n2;
            !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta)
        }
        Geometry::Box { center, half_extents, yaw } => {
            // Dense sampling with an exact point-inside test. This can only
            // under-report blockers, never invent them, so an oracle "clear"
            // confirms a production "clear".
            for i in 1..BOX_SAMPLES {
                let t = i as f64 / BOX_SAMPLES as f64;
                let p = a + (b - a) * t;
                let local = (p - *center).rotated_z(-*yaw);
                if local.x.abs() <= half_extents.x
                    && local.y.abs() <= half_extents.y
                    && local.z.abs() <= half_extents.z
                {
                    return false;
                }
            }
            true
        }
    }
}

/// Re-tests a sightline against every entity in the world.
pub fn oracle_los_clear(
    world: &WorldState,
    from: Vec3,
    to: Vec3,
    exclude: Option<&EntityId>,
) -> bool {
    world
        .entities
        .iter()
        .filter(|e| exclude != Some(&e.id))
        .all(|e| oracle_segment_clear_of(&e.geometry, from, to))
}

/// Independent tight AABB via explicit corner/extreme enumeration.
pub fn oracle_aabb(geo: &Geometry) -> Aabb {
    match geo {
        Geometry::Box { center, half_extents, yaw } => {
            let mut pts = Vec::new();
            for sx in [-1.0, 1.0] {
                for sy in [-1.0, 1.0] {
                    for sz in [-1.0, 1.0] {
                        let corner = Vec3::new(
                            half_extents.x * sx,
                            half_extents.y * sy,
                            half_extents.z * sz,
                        );
                        pts.push(*center + corner.rotated_z(*yaw));
                    }
                }
            }
            Aabb::from_points(pts)
        }
        Geometry::Sphere { center, radius } => Aabb::new(
            *center - Vec3::splat(*radius),
            *center + Vec3::splat(*radius),
        ),
        Geometry::Quad(q) => Aabb::from_points(q.corners()),
    }
}

/// Angle-based frustum membership (the production test is tangent-based).
pub fn oracle_in_frustum(cam: &CameraConfig, p: Vec3) -> bool {
    let fwd = (cam.look_at - cam.position).normalized();
    let right = fwd.cross(cam.up).normalized();
    let up = right.cross(fwd);
    let v = p - cam.position;
    let z = v.dot(fwd);
    if z <= 1e-9 {
        return false;
    }
    let half_y = cam.vfov * 0.5;
    let half_x = ((cam.vfov * 0.5).tan() * cam.width as f64 / cam.height as f64).atan();
    let ang_x = v.dot(right).abs().atan2(z);
    let ang_y = v.dot(up).abs().atan2(z);
    ang_x <= half_x + 1e-12 && ang_y <= half_y + 1e-12
}

/// The 7 probe points: AABB center plus face centers.
pub fn oracle_probe_points(aabb: &Aabb) -> [Vec3; 7] {
    let c = aabb.center();
    [
        c,
        Vec3::new(aabb.min.x, c.y, c.z),
        Vec3::new(aabb.max.x, c.y, c.z),
        Vec3::new(c.x, aabb.min.y, c.z),
        Vec3::new(c.x, aabb.max.y, c.z),
        Vec3::new(c.x, c.y, aabb.min.z),
        Vec3::new(c.x, c.y, aabb.max.z),
    ]
}

/// Full 7-point re-verification: frustum membership (angle route) and
/// line of sight (segment oracle) with the target self-excluded.
pub fn oracle_seven_point_count(
    world: &WorldState,
    cam: &CameraConfig,
    target: &EntityId,
) -> u32 {
    let geo = &world.entity(target).expect("target exists").geometry;
    let aabb = oracle_aabb(geo);
    oracle_probe_points(&aabb)
        .iter()
        .filter(|p| {
            oracle_in_frustum(cam, **p)
                && oracle_los_clear(world, cam.position, **p, Some(target))
        })
        .count() as u32
}

/// Wall clearance recomputed from the room spec.
pub fn oracle_wall_clearance(world: &WorldState, cam: &CameraConfig, d_min: f64) -> bool {
    let o = world.room.floor_rect.origin;
    let xs = world.room.floor_rect.edge_u.x;
    let ys = world.room.floor_rect.edge_v.y;
    let h = world.room.wall_height;
    let p = cam.position;
    let dx = (p.x - o.x).min(o.x + xs - p.x);
    let dy = (p.y - o.y).min(o.y + ys - p.y);
    let dz = (p.z - o.z).min(o.z + h - p.z);
    dx >= d_min && dy >= d_min && dz >= d_min
}

/// Independent supports-reachability: fixed-point iteration over edges.
pub fn oracle_supported_set(
    world: &WorldState,
    root: &EntityId,
) -> std::collections::BTreeSet<EntityId> {
    use scenelab::scene::RelationKind;
    let mut set = std::collections::BTreeSet::new();
    set.insert(root.clone());
    loop {
        let before = set.len();
        for r in &world.relations {
            if r.kind == RelationKind::Supports && set.contains(&r.from) {
                set.insert(r.to.clone());
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

/// Kahn's algorithm: true when the supports graph is acyclic.
pub fn oracle_supports_acyclic(world: &WorldState) -> bool {
    use scenelab::scene::RelationKind;
    use std::collections::BTreeMap;
    let mut indegree: BTreeMap<&EntityId, usize> =
        world.entities.iter().map(|e| (&e.id, 0)).collect();
    let edges: Vec<(&EntityId, &EntityId)> = world
        .relations
        .iter()
        .filter(|r| r.kind == RelationKind::Supports)
        .map(|r| (&r.from, &r.to))
        .collect();
    for (_, to) in &edges {
        if let Some(d) = indegree.get_mut(*to) {
            *d += 1;
        }
    }
    let mut queue: Vec<&EntityId> =
        indegree.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
    let mut removed = 0;
    while let Some(node) = queue.pop() {
        removed += 1;
        for (from, to) in &edges {
            if *from == node {
                if let Some(d) = indegree.get_mut(*to) {
                    *d -= 1;
                    if *d == 0 {
                        queue.push(to);
                    }
                }
            }
        }
    }
    removed == indegree.len()
}
