//! Magnetic glues.
//!
//! Each tile carries one magnet at the midpoint of every edge, set slightly
//! into the body. Two magnets closer than the cutoff exert a central force
//!
//! ```text
//! F = p · α / (d − β)² · (r_j − r_i) / d
//! ```
//!
//! with `d` in centimetres and `F` in newtons; `p = +1` for a cancelling
//! label pair (attraction) and `−1` for any other pair (repulsion). There are
//! no joints anywhere: a bond is just this attraction plus contact.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DVector, Dyn, OMatrix, Vector2, U2};
use serde::{Deserialize, Serialize};

use crate::model::{Edge, GlueLabel};
use crate::physics::{broadphase, TileState, World, Wrench};
use crate::{Error, Result, Vec2};

const M_TO_CM: f64 = 100.0;
/// Distances below this (cm) are clamped to avoid the coincident-point
/// singularity.
pub const MIN_DISTANCE_CM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagnetParams {
    /// N·cm²
    pub alpha: f64,
    /// cm
    pub beta: f64,
    /// Offset of each magnet into the tile body (m).
    pub inset: f64,
    /// Interaction range between magnet centres (m).
    pub cutoff: f64,
}

impl Default for MagnetParams {
    fn default() -> Self {
        MagnetParams {
            alpha: 0.18,
            beta: -0.64,
            inset: 0.15e-3,
            cutoff: 0.03,
        }
    }
}

impl MagnetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.cutoff > 0.0) || !(self.inset >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "magnet parameters need alpha > 0, cutoff > 0, inset ≥ 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Force magnitude (N) at a centre distance of `d_cm` centimetres.
    pub fn magnitude(&self, d_cm: f64) -> f64 {
        self.alpha / (d_cm.max(MIN_DISTANCE_CM) - self.beta).powi(2)
    }

    /// Holding force of one bonded pair: the magnitude at the gap between two
    /// flush magnets.
    pub fn contact_force(&self) -> f64 {
        self.magnitude(2.0 * self.inset * M_TO_CM)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnetInstance {
    pub tile: usize,
    pub edge: Edge,
    pub label: GlueLabel,
    pub position: Vec2,
}

/// The four magnets of `tile` in world coordinates, North first.
pub fn magnets_of(index: usize, tile: &TileState, glues: &[GlueLabel; 4], half_width: f64, inset: f64) -> [MagnetInstance; 4] {
    let (s, c) = tile.angle.sin_cos();
    let reach = half_width - inset;
    Edge::ALL.map(|edge| {
        let n = edge.normal();
        let local = n * reach;
        MagnetInstance {
            tile: index,
            edge,
            label: glues[edge as usize],
            position: tile.position + Vec2::new(c * local.x - s * local.y, s * local.x + c * local.y),
        }
    })
}

/// Force on `gi` exerted by `gj`; the force on `gj` is the negation.
///
/// Zero when either glue is null or the magnets are beyond the cutoff.
pub fn pair_force(gi: &MagnetInstance, gj: &MagnetInstance, params: &MagnetParams) -> Vec2 {
    if gi.label.is_null() || gj.label.is_null() {
        return Vec2::ZERO;
    }
    let delta = gj.position - gi.position;
    let dist = delta.length();
    if dist > params.cutoff {
        return Vec2::ZERO;
    }
    let sign = if gi.label.matches(gj.label) { 1.0 } else { -1.0 };
    let d_cm = dist * M_TO_CM;
    let dir = if dist > 0.0 { delta / dist } else { Vec2::ZERO };
    dir * (sign * params.magnitude(d_cm))
}

/// Net glue wrench on every tile. Pairs of tiles are pruned with a spatial
/// hash; magnets on the same tile never interact.
pub fn accumulate_glue_forces(world: &World) -> Vec<Wrench> {
    let n = world.tiles.len();
    let half = world.params.half_width();
    let magnets: Vec<[MagnetInstance; 4]> = world
        .tiles
        .iter()
        .enumerate()
        .map(|(i, t)| magnets_of(i, t, &world.tileset.kind(t.kind).glues, half, world.magnets.inset))
        .collect();
    let centers: Vec<Vec2> = world.tiles.iter().map(|t| t.position).collect();
    let reach = world.params.tile_width + world.magnets.cutoff;

    let mut out = vec![Wrench::default(); n];
    for (i, j) in broadphase::pairs_within(&centers, reach) {
        if world.tiles[i].is_static && world.tiles[j].is_static {
            continue;
        }
        for gi in &magnets[i] {
            for gj in &magnets[j] {
                let f = pair_force(gi, gj, &world.magnets);
                if f == Vec2::ZERO {
                    continue;
                }
                out[i].force += f;
                out[i].torque += (gi.position - centers[i]).perp_dot(f);
                out[j].force -= f;
                out[j].torque -= (gj.position - centers[j]).perp_dot(f);
            }
        }
    }
    out
}

/// Result of fitting the magnet force curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnetFit {
    pub alpha: f64,
    pub beta: f64,
    /// Sum of squared residuals (N²).
    pub residual: f64,
    pub evaluations: usize,
}

struct CurveProblem<'a> {
    samples: &'a [(f64, f64)],
    params: Vector2<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U2> for CurveProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U2>;
    type ParameterStorage = Owned<f64, U2>;

    fn set_params(&mut self, x: &Vector2<f64>) {
        self.params = *x;
    }

    fn params(&self) -> Vector2<f64> {
        self.params
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let (alpha, beta) = (self.params[0], self.params[1]);
        Some(DVector::from_iterator(
            self.samples.len(),
            self.samples.iter().map(|&(d, f)| alpha / (d - beta).powi(2) - f),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U2>> {
        let (alpha, beta) = (self.params[0], self.params[1]);
        let mut j = OMatrix::<f64, Dyn, U2>::zeros(self.samples.len());
        for (k, &(d, _)) in self.samples.iter().enumerate() {
            let s = d - beta;
            j[(k, 0)] = 1.0 / (s * s);
            j[(k, 1)] = 2.0 * alpha / (s * s * s);
        }
        Some(j)
    }
}

/// Least-squares fit of `F = α / (d − β)²` to `(distance cm, force N)` samples
/// by Levenberg–Marquardt, starting from `α = 0.1`, `β = −0.5`.
pub fn fit_magnet_params(samples: &[(f64, f64)]) -> Result<MagnetFit> {
    if samples.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|(d, f)| !d.is_finite() || !f.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    let mut distances: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distances.sort_by(f64::total_cmp);
    if distances.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("sample distances must be distinct".into()));
    }

    let problem = CurveProblem {
        samples,
        params: Vector2::new(0.1, -0.5),
    };
    let (solved, report) = LevenbergMarquardt::new()
        .with_patience(1000)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::NonConvergence(format!("{:?}", report.termination)));
    }
    let (alpha, beta) = (solved.params[0], solved.params[1]);
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::NonConvergence("non-finite parameters".into()));
    }
    Ok(MagnetFit {
        alpha,
        beta,
        residual: 2.0 * report.objective_function,
        evaluations: report.number_of_evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::DriveSpec;
    use crate::model::{build_chessboard_tileset, ReactorSpec};
    use crate::physics::PhysicsParams;
    use proptest::prelude::*;

    fn magnet(tile: usize, label: i32, x: f64, y: f64) -> MagnetInstance {
        MagnetInstance {
            tile,
            edge: Edge::North,
            label: GlueLabel(label),
            position: Vec2::new(x, y),
        }
    }

    fn world(tiles: Vec<TileState>) -> World {
        World::new(
            ReactorSpec::default(),
            PhysicsParams::default(),
            MagnetParams::default(),
            DriveSpec::default(),
            build_chessboard_tileset(),
            tiles,
        )
        .unwrap()
    }

    #[test]
    fn contact_and_cutoff_magnitudes() {
        let p = MagnetParams::default();
        assert!((p.magnitude(0.0) - 0.18 / 0.64f64.powi(2)).abs() < 1e-5);
        assert!((p.magnitude(0.0) - 0.4395).abs() < 1e-4);
        assert!((p.magnitude(3.0) - 0.18 / 3.64f64.powi(2)).abs() < 1e-12);
        assert!(p.magnitude(3.0) / p.magnitude(0.0) < 0.05);
    }

    #[test]
    fn attraction_repulsion_and_cutoff() {
        let p = MagnetParams::default();
        let a = magnet(0, 1, 0.0, 0.0);
        let f = pair_force(&a, &magnet(1, -1, 0.01, 0.0), &p);
        assert!(f.x > 0.0 && f.y == 0.0);
        assert!((f.x - p.magnitude(1.0)).abs() < 1e-12);
        let g = pair_force(&a, &magnet(1, 1, 0.01, 0.0), &p);
        assert_eq!(g, -f);
        // Cross-magnitude pairs repel.
        assert!(pair_force(&a, &magnet(1, -2, 0.01, 0.0), &p).x < 0.0);
        assert_eq!(pair_force(&a, &magnet(1, -1, 0.0301, 0.0), &p), Vec2::ZERO);
        assert_eq!(pair_force(&a, &magnet(1, 0, 0.01, 0.0), &p), Vec2::ZERO);
        // Coincident magnets: finite, directionless.
        assert_eq!(pair_force(&a, &magnet(1, -1, 0.0, 0.0), &p), Vec2::ZERO);
    }

    proptest! {
        #[test]
        fn pair_force_is_antisymmetric(
            x in -0.03f64..0.03, y in -0.03f64..0.03,
            li in prop::sample::select(vec![-2, -1, 1, 2]),
            lj in prop::sample::select(vec![-2, -1, 1, 2]),
        ) {
            let p = MagnetParams::default();
            let a = magnet(0, li, 0.0, 0.0);
            let b = magnet(1, lj, x, y);
            prop_assert_eq!(pair_force(&a, &b, &p), -pair_force(&b, &a, &p));
        }

        #[test]
        fn magnitude_strictly_decreasing(d in 1e-4f64..3.0, step in 1e-4f64..0.5) {
            let p = MagnetParams::default();
            prop_assert!(p.magnitude(d + step) < p.magnitude(d));
        }
    }

    #[test]
    fn isolated_pair_obeys_action_reaction() {
        // Black tile at the origin, white tile flush to its east.
        let w = world(vec![
            TileState::free(0, Vec2::ZERO, 0.0),
            TileState::free(2, Vec2::new(0.0305, 0.0), 0.0),
        ]);
        let f = accumulate_glue_forces(&w);
        // The cancelling pair pulls, the cross-magnitude corner pairs push back.
        let gap = MagnetParams::default().magnitude(0.08);
        assert!(f[0].force.x > 0.7 * gap && f[0].force.x < gap, "{:?}", f[0]);
        assert_eq!(f[0].force, -f[1].force);
        // Net torque about the pair midpoint.
        let mid = (w.tiles[0].position + w.tiles[1].position) / 2.0;
        let tau: f64 = f
            .iter()
            .zip(&w.tiles)
            .map(|(wr, t)| wr.torque + (t.position - mid).perp_dot(wr.force))
            .sum();
        assert!(tau.abs() < 1e-12);
    }

    #[test]
    fn distant_tiles_feel_nothing() {
        let w = world(vec![
            TileState::free(0, Vec2::ZERO, 0.0),
            TileState::free(2, Vec2::new(0.07, 0.0), 0.0),
        ]);
        assert!(accumulate_glue_forces(&w).iter().all(|f| *f == Wrench::default()));
    }

    /// Direct summation oracle over all magnet pairs for a collinear
    /// black–white–black chain.
    #[test]
    fn middle_of_symmetric_chain_is_balanced() {
        let tiles = vec![
            TileState::free(0, Vec2::new(-0.0303, 0.0), 0.0),
            TileState::free(2, Vec2::ZERO, 0.0),
            TileState::free(1, Vec2::new(0.0303, 0.0), 0.0),
        ];
        let w = world(tiles.clone());
        let f = accumulate_glue_forces(&w);

        let ts = build_chessboard_tileset();
        let mags: Vec<_> = tiles
            .iter()
            .enumerate()
            .map(|(i, t)| magnets_of(i, t, &ts.kind(t.kind).glues, 0.015, 0.15e-3))
            .collect();
        let mut oracle = Vec2::ZERO;
        for other in [0, 2] {
            for gi in &mags[1] {
                for gj in &mags[other] {
                    oracle += pair_force(gi, gj, &MagnetParams::default());
                }
            }
        }
        assert!(oracle.length() < 1e-12);
        assert!(f[1].force.length() < 1e-12);
        assert!(f[0].force.x > 0.0 && f[2].force.x < 0.0);
    }

    #[test]
    fn global_force_balance_on_random_cluster() {
        let ts = build_chessboard_tileset();
        let mut rng = crate::rng::seeded(5);
        let tiles = crate::model::scatter_free_tiles(
            60,
            &ReactorSpec {
                radius: 0.22,
                ..Default::default()
            },
            0.03,
            &[],
            &ts,
            &mut rng,
        )
        .unwrap();
        let f = accumulate_glue_forces(&world(tiles));
        let total: Vec2 = f.iter().map(|w| w.force).sum();
        assert!(total.length() < 1e-9);
        assert!(f.iter().any(|w| w.force != Vec2::ZERO));
    }

    fn synthetic(alpha: f64, beta: f64) -> Vec<(f64, f64)> {
        (0..=6)
            .map(|k| {
                let d = 0.5 * k as f64;
                (d, alpha / (d - beta).powi(2))
            })
            .collect()
    }

    #[test]
    fn fit_recovers_synthetic_parameters() {
        let fit = fit_magnet_params(&synthetic(0.18, -0.64)).unwrap();
        assert!((fit.alpha - 0.18).abs() < 1e-6, "{fit:?}");
        assert!((fit.beta + 0.64).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn fit_scales_alpha_linearly() {
        let doubled: Vec<_> = synthetic(0.18, -0.64).into_iter().map(|(d, f)| (d, 2.0 * f)).collect();
        let fit = fit_magnet_params(&doubled).unwrap();
        assert!((fit.alpha - 0.36).abs() < 1e-6);
        assert!((fit.beta + 0.64).abs() < 1e-6);
    }

    #[test]
    fn fit_rejects_underdetermined_input() {
        assert!(matches!(
            fit_magnet_params(&[(0.0, 0.4), (1.0, 0.06)]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(fit_magnet_params(&[(0.0, 0.4), (0.0, 0.41), (1.0, 0.06)]).is_err());
    }
}
