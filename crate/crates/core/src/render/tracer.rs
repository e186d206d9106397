//! Shading core shared by every render operation.
//!
//! Direct illumination with Lambertian + optional single mirror bounce.
//! Shading is a pure function of the hit point, the world, and the render
//! settings: area-light sample points are drawn once per render from a
//! seed-keyed stream shared by all pixels, so the same 3D point shades
//! identically from every camera and under any thread schedule.

use crate::geom::{intersect, Ray, RayHit};
use crate::math::{mix_parts, Vec3};
use crate::render::RenderSettings;
use crate::scene::{Light, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAG_AREA_SAMPLES: u64 = 0x41524541; // "AREA"
const PRIMARY_T_MIN: f64 = 1e-9;
const SEG_EPS: f64 = 1e-6;

/// Blocker masks are u128 bit sets over entity indices.
pub(crate) const MAX_ENTITIES: usize = 128;

struct AreaLightCache {
    normal: Vec3,
    /// `area / (sample_count * pi)` — constant factor of the estimator.
    weight: f64,
    samples: Vec<Vec3>,
}

/// Result of scanning a shadow segment against the occluder set.
enum BlockScan {
    Clear,
    /// Exactly one entity blocks; unblocking it would admit the light.
    Single(usize),
    Multi,
}

/// Per-pixel shading accumulator, reused across a row.
pub(crate) struct ShadeBuf {
    pub ambient: Vec3,
    pub per_light: Vec<Vec3>,
    /// (entity index, contribution) pairs blocked by exactly that entity:
    /// the per-object shadow-layer credits.
    pub credits: Vec<(usize, Vec3)>,
}

impl ShadeBuf {
    pub fn new(n_lights: usize) -> Self {
        ShadeBuf { ambient: Vec3::ZERO, per_light: vec![Vec3::ZERO; n_lights], credits: Vec::new() }
    }

    pub fn reset(&mut self) {
        self.ambient = Vec3::ZERO;
        self.per_light.fill(Vec3::ZERO);
        self.credits.clear();
    }

    /// Full shading value: ambient plus each light's contribution, summed
    /// in light order (the additivity identity is this very expression).
    pub fn rgb(&self) -> Vec3 {
        let mut acc = self.ambient;
        for c in &self.per_light {
            acc += *c;
        }
        acc
    }
}

pub(crate) struct Tracer<'w> {
    world: &'w WorldState,
    /// Entity subset participating in this render (amodal passes restrict it).
    included: Vec<bool>,
    /// When set, this entity is transparent to shadow segments (the
    /// definitional route for shadow layers).
    shadow_transparent: Option<usize>,
    area: Vec<Option<AreaLightCache>>,
    mirror_bounces: u32,
}

impl<'w> Tracer<'w> {
    pub fn new(world: &'w WorldState, settings: &RenderSettings, included: Vec<bool>) -> Self {
        debug_assert!(world.entities.len() <= MAX_ENTITIES);
        let area = world
            .lights
            .iter()
            .map(|light| match light {
                Light::Point { .. } => None,
                Light::Area { quad, sample_count, .. } => {
                    let n = (*sample_count).max(1) as usize;
                    // Streams are keyed by the light's geometry rather than
                    // its index, so per-light decompositions and full
                    // renders draw identical sample sequences.
                    let mut parts = vec![settings.seed, TAG_AREA_SAMPLES];
                    for v in [quad.origin, quad.edge_u, quad.edge_v] {
                        parts.extend([v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]);
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_parts(&parts));
                    let samples = (0..n)
                        .map(|i| {
                            let u = (i as f64 + rng.random::<f64>()) / n as f64;
                            let v = rng.random::<f64>();
                            quad.origin + quad.edge_u * u + quad.edge_v * v
                        })
                        .collect();
                    Some(AreaLightCache {
                        normal: quad.normal(),
                        weight: quad.area() / (n as f64 * std::f64::consts::PI),
                        samples,
                    })
                }
            })
            .collect();
        Tracer {
            world,
            included,
            shadow_transparent: None,
            area,
            mirror_bounces: settings.mirror_bounces,
        }
    }

    pub fn with_shadow_transparent(mut self, entity_idx: usize) -> Self {
        self.shadow_transparent = Some(entity_idx);
        self
    }

    /// Nearest included entity along the ray.
    pub fn primary_hit(&self, ray: &Ray) -> Option<(usize, RayHit)> {
        let mut best: Option<(usize, RayHit)> = None;
        for (i, e) in self.world.entities.iter().enumerate() {
            if !self.included[i] {
                continue;
            }
            let t_max = best.map_or(f64::INFINITY, |(_, h)| h.t);
            if let Some(h) = intersect(&e.geometry, ray, PRIMARY_T_MIN, t_max) {
                best = Some((i, h));
            }
        }
        best
    }

    /// Scans the open segment a->b for occluders. With `classify` the scan
    /// distinguishes a single blocker (shadow-layer credit) from several;
    /// otherwise it stops at the first.
    fn scan_blockers(&self, a: Vec3, b: Vec3, classify: bool) -> BlockScan {
        let ray = Ray { origin: a, dir: b - a };
        let mut single: Option<usize> = None;
        for (i, e) in self.world.entities.iter().enumerate() {
            if !self.included[i] || self.shadow_transparent == Some(i) {
                continue;
            }
            if intersect(&e.geometry, &ray, SEG_EPS, 1.0 - SEG_EPS).is_some() {
                if !classify {
                    return BlockScan::Multi;
                }
                match single {
                    None => single = Some(i),
                    Some(_) => return BlockScan::Multi,
                }
            }
        }
        match single {
            None => BlockScan::Clear,
            Some(i) => BlockScan::Single(i),
        }
    }

    /// Shades the hit on entity `entity_idx`, accumulating scaled terms into
    /// `buf`. `incoming` is the unit direction of the arriving ray (used for
    /// the mirror bounce); `bounces_left` caps mirror recursion.
    pub fn shade(
        &self,
        entity_idx: usize,
        hit: &RayHit,
        incoming: Vec3,
        scale: f64,
        bounces_left: u32,
        buf: &mut ShadeBuf,
        classify: bool,
    ) {
        let material = &self.world.entities[entity_idx].material;
        let m = material.mirror_reflectance;
        let albedo_eff = material.albedo * (1.0 - m);
        let p = hit.point;
        let n = hit.normal;

        buf.ambient += self.world.ambient.mul_elem(albedo_eff) * scale;

        for (li, light) in self.world.lights.iter().enumerate() {
            match light {
                Light::Point { position, intensity } => {
                    let to_l = *position - p;
                    let d2 = to_l.length_squared();
                    let l = to_l / d2.sqrt();
                    let cos = n.dot(l);
                    if cos <= 0.0 {
                        continue;
                    }
                    let contrib = intensity
                        .mul_elem(albedo_eff)
                        * (cos / (std::f64::consts::PI * d2) * scale);
                    match self.scan_blockers(p, *position, classify) {
                        BlockScan::Clear => buf.per_light[li] += contrib,
                        BlockScan::Single(b) if classify => buf.credits.push((b, contrib)),
                        _ => {}
                    }
                }
                Light::Area { radiance, .. } => {
                    let cache = self.area[li].as_ref().expect("area cache");
                    for q in &cache.samples {
                        let to_l = *q - p;
                        let d2 = to_l.length_squared();
                        let l = to_l / d2.sqrt();
                        let cos_s = n.dot(l);
                        if cos_s <= 0.0 {
                            continue;
                        }
                        // One-sided emitter: only the hemisphere its normal
                        // faces receives light.
                        let cos_l = cache.normal.dot(-l);
                        if cos_l <= 0.0 {
                            continue;
                        }
                        let contrib = radiance
                            .mul_elem(albedo_eff)
                            * (cos_s * cos_l / d2 * cache.weight * scale);
                        match self.scan_blockers(p, *q, classify) {
                            BlockScan::Clear => buf.per_light[li] += contrib,
                            BlockScan::Single(b) if classify => buf.credits.push((b, contrib)),
                            _ => {}
                        }
                    }
                }
            }
        }

        if m > 0.0 && bounces_left > 0 {
            let r = incoming - n * (2.0 * incoming.dot(n));
            let ray = Ray { origin: p, dir: r };
            if let Some((idx2, hit2)) = self.primary_hit(&ray) {
                self.shade(idx2, &hit2, r, scale * m, bounces_left - 1, buf, classify);
            }
        }
    }

    pub fn mirror_bounces(&self) -> u32 {
        self.mirror_bounces
    }
}
