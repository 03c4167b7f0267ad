//! Sequential-impulse contact solver.
//!
//! Velocity constraints are solved with accumulated, clamped impulses and warm
//! started from the previous step. Restitution is applied in a separate pass
//! against the approach speed measured before this step's forces, so resting
//! contacts that are pressed together by glue forces do not bounce.
//! Penetration is removed through split impulses: a Baumgarte-biased
//! pseudo-velocity that moves positions but is discarded afterwards, leaving
//! kinetic energy untouched.

use std::collections::HashMap;

use arrayvec::ArrayVec;

use super::collision::{Contact, Other};
use crate::Vec2;

pub(crate) type CacheKey = (usize, usize, u32);

/// Impulses carried over between steps, keyed by (tile, other, feature).
#[derive(Clone, Debug, Default)]
pub(crate) struct ImpulseCache {
    map: HashMap<CacheKey, (f64, f64)>,
}

impl ImpulseCache {
    pub fn clear(&mut self) {
        self.map.clear();
    }
}

fn other_index(o: Other) -> usize {
    match o {
        Other::Tile(j) => j,
        Other::Wall => usize::MAX,
    }
}

#[inline]
fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// `w × r` for a scalar angular velocity.
#[inline]
fn cross_sv(w: f64, r: Vec2) -> Vec2 {
    Vec2::new(-w * r.y, w * r.x)
}

pub(crate) struct Bodies<'a> {
    pub velocity: &'a mut [Vec2],
    pub angular: &'a mut [f64],
    pub pre_velocity: &'a [Vec2],
    pub pre_angular: &'a [f64],
    pub inv_mass: &'a [f64],
    pub inv_inertia: &'a [f64],
    pub centers: &'a [Vec2],
}

#[derive(Clone, Copy)]
pub(crate) struct Material {
    pub friction: f64,
    pub restitution: f64,
}

pub(crate) struct SolverSettings {
    pub dt: f64,
    pub iterations: usize,
    pub baumgarte: f64,
    pub slop: f64,
    pub restitution_threshold: f64,
}

struct PointConstraint {
    ra: Vec2,
    rb: Vec2,
    normal_mass: f64,
    tangent_mass: f64,
    separation: f64,
    approach_speed: f64,
    normal_impulse: f64,
    tangent_impulse: f64,
    pseudo_impulse: f64,
    id: u32,
}

struct Constraint {
    a: usize,
    b: Option<usize>,
    key_b: usize,
    normal: Vec2,
    tangent: Vec2,
    material: Material,
    points: ArrayVec<PointConstraint, 2>,
}

struct Body {
    inv_mass: f64,
    inv_inertia: f64,
}

impl Bodies<'_> {
    fn body(&self, i: Option<usize>) -> Body {
        match i {
            Some(i) => Body {
                inv_mass: self.inv_mass[i],
                inv_inertia: self.inv_inertia[i],
            },
            None => Body {
                inv_mass: 0.0,
                inv_inertia: 0.0,
            },
        }
    }

    fn point_velocity(&self, i: Option<usize>, r: Vec2) -> Vec2 {
        i.map_or(Vec2::ZERO, |i| self.velocity[i] + cross_sv(self.angular[i], r))
    }

    fn pre_point_velocity(&self, i: Option<usize>, r: Vec2) -> Vec2 {
        i.map_or(Vec2::ZERO, |i| {
            self.pre_velocity[i] + cross_sv(self.pre_angular[i], r)
        })
    }

    fn apply(&mut self, i: Option<usize>, r: Vec2, impulse: Vec2) {
        if let Some(i) = i {
            self.velocity[i] += impulse * self.inv_mass[i];
            self.angular[i] += cross(r, impulse) * self.inv_inertia[i];
        }
    }
}

/// Resolves `contacts` in place on `bodies`, returning pseudo-velocities for
/// the position update.
pub(crate) fn solve(
    contacts: &[Contact],
    materials: impl Fn(&Contact) -> Material,
    bodies: &mut Bodies<'_>,
    cache: &mut ImpulseCache,
    settings: &SolverSettings,
) -> (Vec<Vec2>, Vec<f64>) {
    let mut constraints: Vec<Constraint> = Vec::with_capacity(contacts.len());
    for c in contacts {
        let b = match c.b {
            Other::Tile(j) => Some(j),
            Other::Wall => None,
        };
        let ba = bodies.body(Some(c.a));
        let bb = bodies.body(b);
        if ba.inv_mass == 0.0 && bb.inv_mass == 0.0 {
            continue;
        }
        let n = c.normal;
        let t = Vec2::new(-n.y, n.x);
        let key_b = other_index(c.b);
        let mut points = ArrayVec::new();
        for p in &c.points {
            let ra = p.position - bodies.centers[c.a];
            let rb = b.map_or(Vec2::ZERO, |j| p.position - bodies.centers[j]);
            let k = |dir: Vec2| {
                let (rna, rnb) = (cross(ra, dir), cross(rb, dir));
                ba.inv_mass + bb.inv_mass + ba.inv_inertia * rna * rna + bb.inv_inertia * rnb * rnb
            };
            let (kn, kt) = (k(n), k(t));
            let approach = (bodies.pre_point_velocity(b, rb) - bodies.pre_point_velocity(Some(c.a), ra)).dot(n);
            let (ni, ti) = cache.map.get(&(c.a, key_b, p.id)).copied().unwrap_or((0.0, 0.0));
            points.push(PointConstraint {
                ra,
                rb,
                normal_mass: if kn > 0.0 { 1.0 / kn } else { 0.0 },
                tangent_mass: if kt > 0.0 { 1.0 / kt } else { 0.0 },
                separation: p.separation,
                approach_speed: approach,
                normal_impulse: ni,
                tangent_impulse: ti,
                pseudo_impulse: 0.0,
                id: p.id,
            });
        }
        constraints.push(Constraint {
            a: c.a,
            b,
            key_b,
            normal: n,
            tangent: t,
            material: materials(c),
            points,
        });
    }

    // Warm start.
    for c in &constraints {
        for p in &c.points {
            let impulse = c.normal * p.normal_impulse + c.tangent * p.tangent_impulse;
            bodies.apply(Some(c.a), p.ra, -impulse);
            bodies.apply(c.b, p.rb, impulse);
        }
    }

    let inv_dt = 1.0 / settings.dt;
    for _ in 0..settings.iterations {
        for c in &mut constraints {
            for p in &mut c.points {
                let dv = bodies.point_velocity(c.b, p.rb) - bodies.point_velocity(Some(c.a), p.ra);

                let vt = dv.dot(c.tangent);
                let max_friction = c.material.friction * p.normal_impulse;
                let old = p.tangent_impulse;
                p.tangent_impulse = (old - p.tangent_mass * vt).clamp(-max_friction, max_friction);
                let d = c.tangent * (p.tangent_impulse - old);
                bodies.apply(Some(c.a), p.ra, -d);
                bodies.apply(c.b, p.rb, d);

                let dv = bodies.point_velocity(c.b, p.rb) - bodies.point_velocity(Some(c.a), p.ra);
                let vn = dv.dot(c.normal);
                // Speculative: an open gap may close this step but not more.
                let target = if p.separation > 0.0 { -p.separation * inv_dt } else { 0.0 };
                let old = p.normal_impulse;
                p.normal_impulse = (old - p.normal_mass * (vn - target)).max(0.0);
                let d = c.normal * (p.normal_impulse - old);
                bodies.apply(Some(c.a), p.ra, -d);
                bodies.apply(c.b, p.rb, d);
            }
        }
    }

    cache.clear();
    for c in &constraints {
        for p in &c.points {
            cache_store(cache, c, p);
        }
    }

    // Restitution against the pre-force approach speed.
    for c in &mut constraints {
        if c.material.restitution == 0.0 {
            continue;
        }
        for p in &mut c.points {
            if p.approach_speed > -settings.restitution_threshold || p.normal_impulse == 0.0 {
                continue;
            }
            let dv = bodies.point_velocity(c.b, p.rb) - bodies.point_velocity(Some(c.a), p.ra);
            let vn = dv.dot(c.normal);
            let old = p.normal_impulse;
            p.normal_impulse =
                (old - p.normal_mass * (vn + c.material.restitution * p.approach_speed)).max(0.0);
            let d = c.normal * (p.normal_impulse - old);
            bodies.apply(Some(c.a), p.ra, -d);
            bodies.apply(c.b, p.rb, d);
        }
    }

    // Split-impulse position correction.
    let n = bodies.velocity.len();
    let mut pv = vec![Vec2::ZERO; n];
    let mut pw = vec![0.0; n];
    let penetrating = constraints
        .iter()
        .any(|c| c.points.iter().any(|p| p.separation < -settings.slop));
    if penetrating {
        for _ in 0..settings.iterations {
            for c in &mut constraints {
                for p in &mut c.points {
                    let depth = -p.separation - settings.slop;
                    if depth <= 0.0 {
                        continue;
                    }
                    let target = settings.baumgarte * depth * inv_dt;
                    let va = pv[c.a] + cross_sv(pw[c.a], p.ra);
                    let vb = c.b.map_or(Vec2::ZERO, |j| pv[j] + cross_sv(pw[j], p.rb));
                    let vn = (vb - va).dot(c.normal);
                    let old = p.pseudo_impulse;
                    p.pseudo_impulse = (old + p.normal_mass * (target - vn)).max(0.0);
                    let d = c.normal * (p.pseudo_impulse - old);
                    pv[c.a] -= d * bodies.inv_mass[c.a];
                    pw[c.a] -= cross(p.ra, d) * bodies.inv_inertia[c.a];
                    if let Some(j) = c.b {
                        pv[j] += d * bodies.inv_mass[j];
                        pw[j] += cross(p.rb, d) * bodies.inv_inertia[j];
                    }
                }
            }
        }
    }
    (pv, pw)
}

fn cache_store(cache: &mut ImpulseCache, c: &Constraint, p: &PointConstraint) {
    cache
        .map
        .insert((c.a, c.key_b, p.id), (p.normal_impulse, p.tangent_impulse));
}
