//! Narrow phase for oriented squares and the circular reactor wall.
//!
//! Square–square contacts follow the usual reference-face / incident-edge
//! clipping scheme: the separating axis with the largest separation picks the
//! reference face, the most anti-parallel edge of the other square is clipped
//! against the reference face's side planes, and surviving points within the
//! speculative margin become the manifold (at most two points).

use arrayvec::ArrayVec;

use crate::Vec2;

/// Oriented square.
#[derive(Clone, Copy, Debug)]
pub struct Square {
    pub center: Vec2,
    /// Body `+x` and `+y` axes in world frame.
    pub axes: [Vec2; 2],
    pub half: f64,
}

impl Square {
    pub fn new(center: Vec2, angle: f64, half: f64) -> Square {
        let (s, c) = angle.sin_cos();
        Square {
            center,
            axes: [Vec2::new(c, s), Vec2::new(-s, c)],
            half,
        }
    }

    /// Counter-clockwise from the bottom-left corner.
    pub fn vertices(&self) -> [Vec2; 4] {
        let [ex, ey] = self.axes.map(|a| a * self.half);
        let c = self.center;
        [c - ex - ey, c + ex - ey, c + ex + ey, c - ex + ey]
    }

    /// Outward normal of edge `i` (from vertex `i` to vertex `i + 1`).
    pub fn normals(&self) -> [Vec2; 4] {
        let [ex, ey] = self.axes;
        [-ey, ex, ey, -ex]
    }
}

/// Which body sits on the far side of a contact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Other {
    Tile(usize),
    Wall,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactPoint {
    pub position: Vec2,
    /// Signed gap along the normal; negative when penetrating.
    pub separation: f64,
    /// Feature key used to carry impulses across steps.
    pub id: u32,
}

impl ContactPoint {
    pub fn penetration(&self) -> f64 {
        -self.separation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contact {
    pub a: usize,
    pub b: Other,
    /// Unit normal pointing from `a` towards `b`.
    pub normal: Vec2,
    pub points: ArrayVec<ContactPoint, 2>,
}

impl Contact {
    pub fn max_penetration(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.penetration())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Largest separation of `b` from the faces of `a`, with the face index.
fn max_separation(a: &Square, b: &Square) -> (usize, f64) {
    let normals = a.normals();
    let va = a.vertices();
    let vb = b.vertices();
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..4 {
        let n = normals[i];
        let s = vb
            .iter()
            .map(|&v| n.dot(v - va[i]))
            .fold(f64::INFINITY, f64::min);
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// SAT separation between two squares: positive when a separating axis
/// exists. A lower bound on their true distance.
pub fn separation(a: &Square, b: &Square) -> f64 {
    max_separation(a, b).1.max(max_separation(b, a).1)
}

/// True unless the squares are separated by more than `margin`.
pub fn boxes_overlap(p: Vec2, pa: f64, q: Vec2, qa: f64, half: f64, margin: f64) -> bool {
    if (p - q).length_squared() > (2.0 * half * std::f64::consts::SQRT_2 + margin).powi(2) {
        return false;
    }
    separation(&Square::new(p, pa, half), &Square::new(q, qa, half)) < margin
}

#[derive(Clone, Copy)]
struct ClipVertex {
    v: Vec2,
    id: u32,
}

/// Keeps the part of segment `input` on the inner side of the plane
/// `dot(normal, x) <= offset`.
fn clip_segment(input: [ClipVertex; 2], normal: Vec2, offset: f64, plane_id: u32) -> ArrayVec<ClipVertex, 2> {
    let mut out = ArrayVec::new();
    let d0 = normal.dot(input[0].v) - offset;
    let d1 = normal.dot(input[1].v) - offset;
    if d0 <= 0.0 {
        out.push(input[0]);
    }
    if d1 <= 0.0 {
        out.push(input[1]);
    }
    if d0 * d1 < 0.0 && out.len() < 2 {
        let t = d0 / (d0 - d1);
        out.push(ClipVertex {
            v: input[0].v + (input[1].v - input[0].v) * t,
            id: plane_id,
        });
    }
    out
}

/// Contact manifold between squares `a` and `b`, or `None` when they are
/// further apart than `margin`.
pub fn collide_squares(ia: usize, a: &Square, ib: usize, b: &Square, margin: f64) -> Option<Contact> {
    let (edge_a, sep_a) = max_separation(a, b);
    if sep_a > margin {
        return None;
    }
    let (edge_b, sep_b) = max_separation(b, a);
    if sep_b > margin {
        return None;
    }

    // Prefer `a` as reference unless `b` is clearly better; keeps the choice
    // stable for nearly parallel faces.
    let tol = 1e-3 * a.half;
    let (reference, incident, edge, flip) = if sep_b > sep_a + tol {
        (b, a, edge_b, true)
    } else {
        (a, b, edge_a, false)
    };

    let n = reference.normals()[edge];
    let rv = reference.vertices();
    let v1 = rv[edge];
    let v2 = rv[(edge + 1) % 4];

    let inc_normals = incident.normals();
    let inc_edge = (0..4)
        .min_by(|&i, &j| n.dot(inc_normals[i]).total_cmp(&n.dot(inc_normals[j])))
        .unwrap_or(0);
    let iv = incident.vertices();
    let i2 = (inc_edge + 1) % 4;
    let segment = [
        ClipVertex {
            v: iv[inc_edge],
            id: inc_edge as u32,
        },
        ClipVertex {
            v: iv[i2],
            id: i2 as u32,
        },
    ];

    let tangent = (v2 - v1).normalize();
    let clipped = clip_segment(segment, -tangent, -tangent.dot(v1), 4);
    if clipped.len() < 2 {
        return None;
    }
    let clipped = clip_segment([clipped[0], clipped[1]], tangent, tangent.dot(v2), 5);
    if clipped.len() < 2 {
        return None;
    }

    let face_offset = n.dot(v1);
    let mut points = ArrayVec::new();
    for cv in clipped {
        let s = n.dot(cv.v) - face_offset;
        if s <= margin {
            points.push(ContactPoint {
                position: cv.v - n * (0.5 * s),
                separation: s,
                id: edge as u32 | (cv.id << 2) | ((flip as u32) << 5),
            });
        }
    }
    if points.is_empty() {
        return None;
    }
    Some(Contact {
        a: ia,
        b: Other::Tile(ib),
        normal: if flip { -n } else { n },
        points,
    })
}

/// One contact per corner of `sq` within `margin` of the wall of a reactor of
/// the given radius centred at the origin.
pub fn collide_wall(index: usize, sq: &Square, radius: f64, margin: f64, out: &mut Vec<Contact>) {
    if sq.center.length() + sq.half * std::f64::consts::SQRT_2 < radius - margin {
        return;
    }
    for (k, v) in sq.vertices().into_iter().enumerate() {
        let dist = v.length();
        let s = radius - dist;
        if s <= margin && dist > 0.0 {
            let normal = v / dist;
            let mut points = ArrayVec::new();
            points.push(ContactPoint {
                position: v + normal * (0.5 * s),
                separation: s,
                id: k as u32,
            });
            out.push(Contact {
                a: index,
                b: Other::Wall,
                normal,
                points,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    const H: f64 = 0.015;

    #[test]
    fn touching_axis_aligned_squares() {
        let a = Square::new(Vec2::ZERO, 0.0, H);
        let b = Square::new(Vec2::new(0.03, 0.0), 0.0, H);
        let c = collide_squares(0, &a, 1, &b, 1e-3).expect("touching squares must report a contact");
        assert_eq!(c.points.len(), 2);
        assert!((c.normal - Vec2::X).length() < 1e-12);
        for p in &c.points {
            assert!(p.penetration().abs() < 1e-12);
            assert!((p.position.x - 0.015).abs() < 1e-12);
        }
        let far = Square::new(Vec2::new(0.05, 0.0), 0.0, H);
        assert!(collide_squares(0, &a, 1, &far, 1e-3).is_none());
    }

    #[test]
    fn overlapping_squares_report_penetration_and_normal_direction() {
        let a = Square::new(Vec2::ZERO, 0.0, H);
        let b = Square::new(Vec2::new(0.0, -0.028), 0.0, H);
        let c = collide_squares(3, &a, 7, &b, 1e-3).unwrap();
        assert!((c.normal - Vec2::NEG_Y).length() < 1e-12);
        for p in &c.points {
            assert!((p.penetration() - 0.002).abs() < 1e-12);
        }
        // Swapping the roles flips the normal.
        let d = collide_squares(7, &b, 3, &a, 1e-3).unwrap();
        assert!((d.normal + c.normal).length() < 1e-12);
    }

    #[test]
    fn corner_into_face() {
        let a = Square::new(Vec2::ZERO, 0.0, H);
        // Diamond whose lowest corner dips 1 mm into a's top face.
        let b = Square::new(Vec2::new(0.0, H + H * SQRT_2 - 0.001), FRAC_PI_4, H);
        let c = collide_squares(0, &a, 1, &b, 1e-4).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!((c.normal - Vec2::Y).length() < 1e-9);
        assert!((c.points[0].penetration() - 0.001).abs() < 1e-9);
    }

    /// Wall contact oracle: a corner is in contact exactly when its distance
    /// from the reactor centre reaches the radius.
    #[test]
    fn wall_contact_matches_corner_distance() {
        let radius = 0.6;
        let mut rng = crate::rng::seeded(3);
        use rand::Rng;
        for _ in 0..2000 {
            let r = rng.random_range(0.5..0.6);
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let ang = rng.random_range(0.0..std::f64::consts::TAU);
            let sq = Square::new(Vec2::new(r * th.cos(), r * th.sin()), ang, H);
            let mut out = Vec::new();
            collide_wall(0, &sq, radius, 0.0, &mut out);
            let expected = sq.vertices().iter().filter(|v| v.length() >= radius).count();
            assert_eq!(out.len(), expected);
            for c in &out {
                assert!(c.points[0].penetration() >= 0.0);
                assert!((c.normal.length() - 1.0).abs() < 1e-12);
            }
        }
        let sq = Square::new(Vec2::new(radius - 0.01, 0.0), 0.0, H);
        let mut out = Vec::new();
        collide_wall(0, &sq, radius, 0.0, &mut out);
        assert_eq!(out.len(), 2);
        for c in &out {
            assert!((c.points[0].penetration() - ((0.6f64 - 0.01 + H).hypot(H) - 0.6)).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_predicate_agrees_with_collision() {
        let mut rng = crate::rng::seeded(11);
        use rand::Rng;
        for _ in 0..5000 {
            let p = Vec2::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            let pa = rng.random_range(0.0..6.3);
            let qa = rng.random_range(0.0..6.3);
            let hit = collide_squares(0, &Square::new(Vec2::ZERO, pa, H), 1, &Square::new(p, qa, H), 0.0)
                .is_some_and(|c| c.max_penetration() > 0.0);
            if hit {
                assert!(boxes_overlap(Vec2::ZERO, pa, p, qa, H, 0.0));
            }
        }
    }
}
