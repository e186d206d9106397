//! Ray/segment intersection and overlap tests against scene primitives.
//!
//! Boxes only ever rotate about +z (yaw), so box tests run in a local frame
//! reached by un-rotating about the box center. All tests are exact; there
//! is no acceleration structure because worlds stay small.

use crate::math::Vec3;
use crate::scene::{Geometry, Quad};

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    pub t: f64,
    pub point: Vec3,
    /// Geometric normal oriented against the incoming ray (double-sided).
    pub normal: Vec3,
}

/// First intersection with `geo` for ray parameter t in (t_min, t_max).
pub fn intersect(geo: &Geometry, ray: &Ray, t_min: f64, t_max: f64) -> Option<RayHit> {
    match geo {
        Geometry::Box { center, half_extents, yaw } => {
            intersect_box(*center, *half_extents, *yaw, ray, t_min, t_max)
        }
        Geometry::Sphere { center, radius } => intersect_sphere(*center, *radius, ray, t_min, t_max),
        Geometry::Quad(q) => intersect_quad(q, ray, t_min, t_max),
    }
}

/// True if `geo` blocks the open segment between `a` and `b`.
pub fn segment_blocked(geo: &Geometry, a: Vec3, b: Vec3) -> bool {
    const SEG_EPS: f64 = 1e-6;
    let ray = Ray { origin: a, dir: b - a };
    intersect(geo, &ray, SEG_EPS, 1.0 - SEG_EPS).is_some()
}

fn intersect_box(
    center: Vec3,
    half: Vec3,
    yaw: f64,
    ray: &Ray,
    t_min: f64,
    t_max: f64,
) -> Option<RayHit> {
    let o = (ray.origin - center).rotated_z(-yaw);
    let d = ray.dir.rotated_z(-yaw);

    let mut t_enter = t_min;
    let mut t_exit = t_max;
    let mut enter_axis = usize::MAX;
    let mut enter_sign = 0.0;
    let (os, ds, hs) = ([o.x, o.y, o.z], [d.x, d.y, d.z], [half.x, half.y, half.z]);
    for axis in 0..3 {
        if ds[axis].abs() < 1e-15 {
            if os[axis].abs() > hs[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / ds[axis];
        let mut t0 = (-hs[axis] - os[axis]) * inv;
        let mut t1 = (hs[axis] - os[axis]) * inv;
        let mut sign = -ds[axis].signum();
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = -sign;
        }
        if t0 > t_enter {
            t_enter = t0;
            enter_axis = axis;
            enter_sign = sign;
        }
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }

    // Entry inside (t_min, t_max): use the entry face; otherwise the ray
    // starts inside the box and we take the exit face.
    let (t, axis, sign) = if enter_axis != usize::MAX && t_enter > t_min {
        (t_enter, enter_axis, enter_sign)
    } else {
        // exit face
        let mut axis = 0;
        let mut best = f64::INFINITY;
        let mut sign = 1.0;
        for a in 0..3 {
            if ds[a].abs() < 1e-15 {
                continue;
            }
            let inv = 1.0 / ds[a];
            let t1 = ((if ds[a] > 0.0 { hs[a] } else { -hs[a] }) - os[a]) * inv;
            if t1 < best {
                best = t1;
                axis = a;
                sign = ds[a].signum();
            }
        }
        if !(best > t_min && best < t_max) {
            return None;
        }
        (best, axis, sign)
    };
    if !(t > t_min && t < t_max) {
        return None;
    }

    let mut n_local = Vec3::ZERO;
    match axis {
        0 => n_local.x = sign,
        1 => n_local.y = sign,
        _ => n_local.z = sign,
    }
    let mut normal = n_local.rotated_z(yaw);
    if normal.dot(ray.dir) > 0.0 {
        normal = -normal;
    }
    Some(RayHit { t, point: ray.origin + ray.dir * t, normal })
}

fn intersect_sphere(center: Vec3, radius: f64, ray: &Ray, t_min: f64, t_max: f64) -> Option<RayHit> {
    let oc = ray.origin - center;
    let a = ray.dir.length_squared();
    let half_b = oc.dot(ray.dir);
    let c = oc.length_squared() - radius * radius;
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_d = disc.sqrt();
    let mut t = (-half_b - sqrt_d) / a;
    if !(t > t_min && t < t_max) {
        t = (-half_b + sqrt_d) / a;
        if !(t > t_min && t < t_max) {
            return None;
        }
    }
    let point = ray.origin + ray.dir * t;
    let mut normal = (point - center) / radius;
    if normal.dot(ray.dir) > 0.0 {
        normal = -normal;
    }
    Some(RayHit { t, point, normal })
}

fn intersect_quad(q: &Quad, ray: &Ray, t_min: f64, t_max: f64) -> Option<RayHit> {
    let n = q.edge_u.cross(q.edge_v);
    let denom = ray.dir.dot(n);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (q.origin - ray.origin).dot(n) / denom;
    if !(t > t_min && t < t_max) {
        return None;
    }
    let p = ray.origin + ray.dir * t;
    let rel = p - q.origin;
    // Solve rel = alpha*u + beta*v in the quad plane.
    let uu = q.edge_u.length_squared();
    let vv = q.edge_v.length_squared();
    let uv = q.edge_u.dot(q.edge_v);
    let ru = rel.dot(q.edge_u);
    let rv = rel.dot(q.edge_v);
    let det = uu * vv - uv * uv;
    if det.abs() < 1e-18 {
        return None;
    }
    let alpha = (ru * vv - rv * uv) / det;
    let beta = (rv * uu - ru * uv) / det;
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return None;
    }
    let mut normal = n.normalized();
    if normal.dot(ray.dir) > 0.0 {
        normal = -normal;
    }
    Some(RayHit { t, point: p, normal })
}

/// Overlap depth between two primitives, in meters. Positive means the
/// shapes interpenetrate by that amount; zero or negative means touching or
/// separated. `inflate` grows both shapes (used for placement margins).
/// Pairs involving a quad report 0 (quads are structural surfaces; resting
/// contact is legitimate and handled by the support checks).
pub fn penetration_depth(a: &Geometry, b: &Geometry, inflate: f64) -> f64 {
    match (a, b) {
        (Geometry::Sphere { center: ca, radius: ra }, Geometry::Sphere { center: cb, radius: rb }) => {
            (ra + rb + 2.0 * inflate) - ca.distance(*cb)
        }
        (Geometry::Sphere { center, radius }, Geometry::Box { .. }) => {
            sphere_box_depth(*center, *radius + inflate, b, inflate)
        }
        (Geometry::Box { .. }, Geometry::Sphere { center, radius }) => {
            sphere_box_depth(*center, *radius + inflate, a, inflate)
        }
        (Geometry::Box { .. }, Geometry::Box { .. }) => box_box_depth(a, b, inflate),
        _ => 0.0,
    }
}

fn sphere_box_depth(s_center: Vec3, s_radius: f64, b: &Geometry, inflate: f64) -> f64 {
    let Geometry::Box { center, half_extents, yaw } = b else { return 0.0 };
    let half = *half_extents + Vec3::splat(inflate);
    let local = (s_center - *center).rotated_z(-*yaw);
    // Signed distance from the sphere center to the box surface.
    let q = local.abs() - half;
    let outside = q.max_elem(Vec3::ZERO).length();
    let inside = q.max_component().min(0.0);
    s_radius - (outside + inside)
}

fn box_box_depth(a: &Geometry, b: &Geometry, inflate: f64) -> f64 {
    let (Geometry::Box { center: ca, half_extents: ha, yaw: ya },
         Geometry::Box { center: cb, half_extents: hb, yaw: yb }) = (a, b)
    else {
        return 0.0;
    };
    let ha = *ha + Vec3::splat(inflate);
    let hb = *hb + Vec3::splat(inflate);

    // z interval (yaw never tilts a box)
    let z_overlap = (ca.z + ha.z).min(cb.z + hb.z) - (ca.z - ha.z).max(cb.z - hb.z);
    if z_overlap <= 0.0 {
        return z_overlap;
    }

    // 2D SAT over the footprint rectangles: 4 candidate axes.
    let corners = |c: &Vec3, h: Vec3, yaw: f64| -> [(f64, f64); 4] {
        let mut out = [(0.0, 0.0); 4];
        for (i, (sx, sy)) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].iter().enumerate()
        {
            let p = Vec3::new(h.x * sx, h.y * sy, 0.0).rotated_z(yaw);
            out[i] = (c.x + p.x, c.y + p.y);
        }
        out
    };
    let ca2 = corners(ca, ha, *ya);
    let cb2 = corners(cb, hb, *yb);

    let mut min_overlap = f64::INFINITY;
    for (yaw, _) in [(*ya, ()), (*yb, ())] {
        for axis_angle in [yaw, yaw + std::f64::consts::FRAC_PI_2] {
            let (axc, axs) = (axis_angle.cos(), axis_angle.sin());
            let project = |pts: &[(f64, f64); 4]| -> (f64, f64) {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (x, y) in pts {
                    let d = x * axc + y * axs;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                (lo, hi)
            };
            let (alo, ahi) = project(&ca2);
            let (blo, bhi) = project(&cb2);
            let overlap = ahi.min(bhi) - alo.max(blo);
            if overlap <= 0.0 {
                return overlap;
            }
            min_overlap = min_overlap.min(overlap);
        }
    }
    min_overlap.min(z_overlap)
}

/// True if the point lies inside the solid volume of the shape (always
/// false for quads, which have no volume).
pub fn point_inside(geo: &Geometry, p: Vec3) -> bool {
    match geo {
        Geometry::Box { center, half_extents, yaw } => {
            let local = (p - *center).rotated_z(-*yaw);
            local.x.abs() <= half_extents.x
                && local.y.abs() <= half_extents.y
                && local.z.abs() <= half_extents.z
        }
        Geometry::Sphere { center, radius } => p.distance(*center) <= *radius,
        Geometry::Quad(_) => false,
    }
}

/// True if the point (x, y) lies inside the upward-facing footprint of the
/// shape's top surface.
pub fn point_in_top_footprint(geo: &Geometry, x: f64, y: f64) -> bool {
    match geo {
        Geometry::Box { center, half_extents, yaw } => {
            let local = Vec3::new(x - center.x, y - center.y, 0.0).rotated_z(-*yaw);
            local.x.abs() <= half_extents.x && local.y.abs() <= half_extents.y
        }
        Geometry::Sphere { center, radius } => {
            let dx = x - center.x;
            let dy = y - center.y;
            dx * dx + dy * dy <= radius * radius
        }
        Geometry::Quad(_) => {
            let b = geo.aabb();
            x >= b.min.x && x <= b.max.x && y >= b.min.y && y <= b.max.y
        }
    }
}

/// Geometric consistency of a `supporter supports supportee` edge: the
/// supportee's resting face sits within `eps` of the supporter's top
/// surface and their footprints overlap.
pub fn support_contact_ok(supportee: &Geometry, supporter: &Geometry, eps: f64) -> bool {
    let gap = supportee.bottom_z() - supporter.top_z();
    if gap.abs() > eps {
        return false;
    }
    supportee.aabb().xy_overlap_area(&supporter.aabb()) > 0.0
        || footprints_touch(supportee, supporter)
}

fn footprints_touch(a: &Geometry, b: &Geometry) -> bool {
    // Spheres resting on a surface have a contact *point*; check the center.
    let ca = a.aabb().center();
    point_in_top_footprint(b, ca.x, ca.y)
}
