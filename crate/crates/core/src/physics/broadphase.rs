//! Uniform spatial hash for neighbour pruning.

use std::collections::HashMap;

use crate::Vec2;

/// All index pairs `(i, j)`, `i < j`, whose points lie within `radius` of each
/// other, sorted lexicographically.
///
/// Points are bucketed in square cells of side `radius`, so every qualifying
/// pair sits in the same or an adjacent cell.
pub fn pairs_within(points: &[Vec2], radius: f64) -> Vec<(usize, usize)> {
    let inv = 1.0 / radius;
    let key = |p: Vec2| ((p.x * inv).floor() as i64, (p.y * inv).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut pairs = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let (kx, ky) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(kx + dx, ky + dy)) {
                    pairs.extend(
                        bucket
                            .iter()
                            .filter(|&&j| j > i && (points[j] - p).length_squared() <= r2)
                            .map(|&j| (i, j)),
                    );
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Reference O(n²) enumeration with the same contract as [`pairs_within`].
pub fn pairs_within_brute(points: &[Vec2], radius: f64) -> Vec<(usize, usize)> {
    let r2 = radius * radius;
    let mut pairs = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[j] - points[i]).length_squared() <= r2 {
                pairs.push((i, j));
            }
        }
    }
    pairs
}
