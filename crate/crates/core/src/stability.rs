//! Force balance between a seeded assembly and its seed.
//!
//! An assembly of `n_s × n_s` tiles sits in the corner of an L-shaped seed
//! whose `2 n_s` glues hold it with the net glue force `F_ng`, while the drive
//! pushes every tile with `F_i`, summing to the net tile force `F_nt`. Under
//! shaking all tiles share one acceleration, so `F_nt = n_s² m_t a` grows
//! faster than the glue hold and the assembly size is bounded.
//!
//! The frame is seed-aligned: the seed lies in the `+[1, 1]` direction from
//! the assembly's centre of gravity.

use std::io::Write;

use crate::analysis::{detect_bonds, seed_component};
use crate::drive::{DriveMode, DriveSpec};
use crate::glue::{accumulate_glue_forces, MagnetParams};
use crate::harness::step_world;
use crate::model::{build_chessboard_tileset, Cell, Color, DriveParams, Family, GlueLabel, ReactorSpec, TileKind, Tileset};
use crate::physics::{PhysicsParams, TileState, World};
use crate::{Error, Result, Vec2};

/// Which closed quadrant counts as "held".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QuadrantConvention {
    /// The glue force points into the seed; the assembly is held while the
    /// resultant stays in the closed quadrant around `+[1, 1]`.
    #[default]
    TowardSeed,
    /// The literal reading: held while the resultant lies in the closed third
    /// quadrant, even though the glue force itself points along `+[1, 1]`.
    ThirdQuadrant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetachmentTest {
    /// General predicate on the direction of the resultant.
    Quadrant(QuadrantConvention),
    /// Cyclic shaking sweeps every direction, so only magnitudes matter.
    Harmonic,
}

impl Default for DetachmentTest {
    fn default() -> Self {
        DetachmentTest::Quadrant(QuadrantConvention::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityInput {
    /// Tiles per seed side.
    pub seed_side: u32,
    /// Tile mass (kg).
    pub tile_mass: f64,
    /// Holding force of a single glue (N).
    pub glue_force: f64,
    /// Common acceleration of the tiles (m/s²).
    pub acceleration: Vec2,
}

impl StabilityInput {
    pub fn net_tile_force(&self) -> Vec2 {
        let n = self.seed_side as f64;
        self.acceleration * (n * n * self.tile_mass)
    }

    pub fn net_glue_force(&self) -> Vec2 {
        net_glue_force(self.seed_side, self.glue_force)
    }

    pub fn is_detached(&self, test: DetachmentTest) -> bool {
        is_detached(self.net_tile_force(), self.net_glue_force(), test)
    }
}

/// Vector sum of the drive forces on the assembly tiles.
pub fn net_tile_force(forces: &[Vec2]) -> Vec2 {
    forces.iter().copied().sum()
}

/// Combined hold of the `2 n_s` seed glues: `2 n_s F_g (√2/2) [1, 1]`.
pub fn net_glue_force(seed_side: u32, glue_force: f64) -> Vec2 {
    Vec2::splat(2.0 * seed_side as f64 * glue_force * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn is_detached(net_tile: Vec2, net_glue: Vec2, test: DetachmentTest) -> bool {
    match test {
        DetachmentTest::Harmonic => net_glue.length() < net_tile.length(),
        DetachmentTest::Quadrant(convention) => {
            let r = net_tile + net_glue;
            let held = match convention {
                QuadrantConvention::TowardSeed => r.x >= 0.0 && r.y >= 0.0,
                QuadrantConvention::ThirdQuadrant => r.x <= 0.0 && r.y <= 0.0,
            };
            !held
        }
    }
}

fn require_positive(values: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in values {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Fundamental size limit `√(2 F_g / (m_t ‖a‖))`: an assembly whose summed
/// drive `n_s² m_t ‖a‖` exceeds a fixed two-glue hold `2 F_g` detaches.
pub fn critical_seed_size(glue_force: f64, tile_mass: f64, acceleration: f64) -> Result<f64> {
    require_positive(&[
        ("glue force", glue_force),
        ("tile mass", tile_mass),
        ("acceleration", acceleration),
    ])?;
    Ok((2.0 * glue_force / (tile_mass * acceleration)).sqrt())
}

/// Side length at which `n_s² m_t ‖a‖` equals the full L-seed hold
/// `2 n_s F_g`, i.e. where the harmonic test on [`StabilityInput`] flips.
pub fn glue_balance_size(glue_force: f64, tile_mass: f64, acceleration: f64) -> Result<f64> {
    require_positive(&[
        ("glue force", glue_force),
        ("tile mass", tile_mass),
        ("acceleration", acceleration),
    ])?;
    Ok(2.0 * glue_force / (tile_mass * acceleration))
}

/// Drive forces summed over the tiles of `component`.
pub fn measured_net_tile_force(forces: &[Vec2], component: &[usize]) -> Vec2 {
    component.iter().map(|&i| forces[i]).sum()
}

/// Holding force of one bond: the glue force on a free tile resting flush
/// against a complementary static tile, all magnet pairs included.
pub fn measured_glue_force(physics: &PhysicsParams, magnets: &MagnetParams) -> Result<f64> {
    let ts = build_chessboard_tileset();
    let w = physics.tile_width;
    let seed = ts.seed_kind(Color::Black).map(|k| k.id).unwrap_or(0);
    let free = ts.free_kinds().find(|k| k.color == Color::White).map(|k| k.id).unwrap_or(0);
    let world = World::new(
        ReactorSpec::default(),
        *physics,
        *magnets,
        DriveSpec::default(),
        ts,
        vec![TileState::fixed(seed, Vec2::ZERO, 0.0), TileState::free(free, Vec2::new(0.0, -w), 0.0)],
    )?;
    Ok(accumulate_glue_forces(&world)[1].force.y)
}

/// Simulated size limit: an `n × n` block hanging below a straight row of
/// `n` static tiles, shaken with acceleration `a`.
///
/// Only the two end tiles of the row carry glue, so the hold is a fixed pair
/// of bonds whose lever arm grows with the block; the middle tiles give
/// contact support only. Friction is switched off as in the force balance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetachmentProbe {
    pub physics: PhysicsParams,
    pub magnets: MagnetParams,
    /// Hz
    pub frequency: f64,
    /// Excitation periods to simulate.
    pub periods: f64,
}

impl Default for DetachmentProbe {
    fn default() -> Self {
        DetachmentProbe {
            physics: PhysicsParams {
                friction_tile_tile: 0.0,
                friction_tile_floor: 0.0,
                angular_friction_floor: 0.0,
                // Flush magnets are 0.3 mm apart; their transverse stiffness
                // needs a finer step than the default to stay stable without
                // contact friction.
                dt: 1.0 / 240.0,
                ..Default::default()
            },
            magnets: MagnetParams::default(),
            frequency: 0.25,
            periods: 2.0,
        }
    }
}

impl DetachmentProbe {
    fn tileset() -> Tileset {
        let mut ts = build_chessboard_tileset();
        let id = ts.kinds.len();
        ts.kinds.push(TileKind {
            id,
            glues: [GlueLabel::NULL; 4],
            family: Family::Seed,
            color: Color::Black,
            drive: DriveParams::ZERO,
        });
        ts
    }

    fn block(&self, side: u32, ts: &Tileset) -> Vec<TileState> {
        let w = self.physics.tile_width;
        let n = side as i32;
        let kind = |c: Cell, seed: bool| {
            let color = ts.ground_truth.color_at(c);
            ts.kinds
                .iter()
                .find(|k| k.color == color && (k.family == Family::Seed) == seed && !k.glues[0].is_null())
                .map(|k| k.id)
                .unwrap_or(0)
        };
        let glue_free = ts.kinds.len() - 1;
        let mut tiles = Vec::new();
        for x in 0..n {
            let c = Cell::new(x, 0);
            let k = if x == 0 || x == n - 1 { kind(c, true) } else { glue_free };
            tiles.push(TileState::fixed(k, Vec2::new(x as f64 * w, 0.0), 0.0));
        }
        for y in 1..=n {
            for x in 0..n {
                let c = Cell::new(x, -y);
                tiles.push(TileState::free(kind(c, false), Vec2::new(x as f64 * w, -y as f64 * w), 0.0));
            }
        }
        tiles
    }

    /// True when any block tile leaves the seed's bond component during the
    /// run. Bonds are checked every 50 ms with the default analysis
    /// thresholds.
    pub fn detaches(&self, side: u32, acceleration: f64) -> Result<bool> {
        if side == 0 {
            return Err(Error::InvalidParameter("probe block needs at least one tile".into()));
        }
        let ts = Self::tileset();
        let tiles = self.block(side, &ts);
        let drive = DriveSpec {
            mode: DriveMode::Shaking,
            force: self.physics.tile_mass * acceleration,
            torque: 0.0,
            frequency: self.frequency,
        };
        let reactor = ReactorSpec {
            radius: 10.0,
            ..Default::default()
        };
        let mut world = World::new(reactor, self.physics, self.magnets, drive, ts.clone(), tiles)?;
        let seeds: Vec<usize> = (0..side as usize).collect();
        let w = self.physics.tile_width;
        let check = ((0.05 / self.physics.dt).round() as u64).max(1);
        let total = (self.periods / self.frequency / self.physics.dt).round() as u64;
        for s in 1..=total {
            step_world(&mut world)?;
            if s % check == 0 {
                let g = detect_bonds(&world.tiles, &ts, w, 0.2 * w, 15f64.to_radians());
                if seed_component(&g, &seeds).len() < world.tiles.len() {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Smallest block side in `1..=max_side` that detaches.
    pub fn onset(&self, acceleration: f64, max_side: u32) -> Result<Option<u32>> {
        for n in 1..=max_side {
            if self.detaches(n, acceleration)? {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub glue_force: f64,
    pub acceleration: f64,
    pub critical_size: f64,
    pub balance_size: f64,
}

pub fn sweep(glue_forces: &[f64], accelerations: &[f64], tile_mass: f64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(glue_forces.len() * accelerations.len());
    for &fg in glue_forces {
        for &a in accelerations {
            rows.push(SweepRow {
                glue_force: fg,
                acceleration: a,
                critical_size: critical_seed_size(fg, tile_mass, a)?,
                balance_size: glue_balance_size(fg, tile_mass, a)?,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["glue_force_n", "acceleration_m_s2", "critical_seed_size", "glue_balance_size"])?;
    for r in rows {
        w.write_record([
            r.glue_force.to_string(),
            r.acceleration.to_string(),
            r.critical_size.to_string(),
            r.balance_size.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}
