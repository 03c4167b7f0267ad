//! External excitation engines.
//!
//! * Unicycle: every free tile gets a body-frame push
//!   `u(t)·a·F_mag·[sin φ, cos φ]` and a torque `u(t)·ω·T_mag`. The two tile
//!   families carry opposite-sign `a` and `ω`, so equal populations cancel.
//! * Shaking: every free tile gets the same rotating force
//!   `F_mag·[sin 2πft, cos 2πft]` and no torque.
//!
//! `u(t) = sin 2πft` in both cases.

use serde::{Deserialize, Serialize};

use crate::model::TileKind;
use crate::physics::{TileState, World, Wrench};
use crate::{Error, Result, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveMode {
    Unicycle,
    Shaking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSpec {
    pub mode: DriveMode,
    /// N
    pub force: f64,
    /// N·m
    pub torque: f64,
    /// Hz
    pub frequency: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        DriveSpec {
            mode: DriveMode::Unicycle,
            force: 0.05,
            torque: 5e-4,
            frequency: 0.1,
        }
    }
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.force >= 0.0 && self.torque >= 0.0 && self.frequency > 0.0)
            || !(self.force.is_finite() && self.torque.is_finite() && self.frequency.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "drive needs force ≥ 0, torque ≥ 0, frequency > 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Wrenches on every tile of `world` at time `t`. Static tiles get zero.
    pub fn wrenches(&self, world: &World, t: f64) -> Vec<Wrench> {
        let u = excitation(t, self.frequency);
        let shake = shaking_drive(t, self.force, self.frequency);
        world
            .tiles
            .iter()
            .map(|tile| {
                if tile.is_static {
                    return Wrench::default();
                }
                match self.mode {
                    DriveMode::Unicycle => unicycle_drive(tile, world.tileset.kind(tile.kind), u, self),
                    DriveMode::Shaking => Wrench {
                        force: shake,
                        torque: 0.0,
                    },
                }
            })
            .collect()
    }
}

/// `sin(2π f t)`.
pub fn excitation(t: f64, frequency: f64) -> f64 {
    (std::f64::consts::TAU * frequency * t).sin()
}

/// Unicycle wrench on one free tile for excitation level `u`.
pub fn unicycle_drive(tile: &TileState, kind: &TileKind, u: f64, spec: &DriveSpec) -> Wrench {
    if tile.is_static {
        return Wrench::default();
    }
    let (s, c) = tile.angle.sin_cos();
    Wrench {
        force: Vec2::new(s, c) * (u * kind.drive.a * spec.force),
        torque: u * kind.drive.omega * spec.torque,
    }
}

/// Uniform rotating force shared by all free tiles.
pub fn shaking_drive(t: f64, force: f64, frequency: f64) -> Vec2 {
    let (s, c) = (std::f64::consts::TAU * frequency * t).sin_cos();
    Vec2::new(s, c) * force
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chessboard_tileset, Family};

    fn kind(family: Family) -> TileKind {
        *build_chessboard_tileset()
            .kinds
            .iter()
            .find(|k| k.family == family)
            .unwrap()
    }

    #[test]
    fn excitation_phases() {
        let f = 0.1;
        assert_eq!(excitation(0.0, f), 0.0);
        assert!((excitation(1.0 / (4.0 * f), f) - 1.0).abs() < 1e-15);
        assert!(excitation(1.0 / f, f).abs() < 1e-12);
    }

    #[test]
    fn unicycle_force_law() {
        let spec = DriveSpec {
            force: 2.0,
            ..Default::default()
        };
        let tile = TileState::free(0, Vec2::ZERO, 0.0);
        let w = unicycle_drive(&tile, &kind(Family::A), 1.0, &spec);
        assert_eq!(w.force, Vec2::new(0.0, 2.0));
        assert_eq!(w.torque, spec.torque);

        let zero = unicycle_drive(&tile, &kind(Family::A), 0.0, &spec);
        assert_eq!(zero.force.length(), 0.0);
        assert_eq!(zero.torque, 0.0);

        let tilted = TileState::free(0, Vec2::ZERO, 1.234);
        let a = unicycle_drive(&tilted, &kind(Family::A), 0.7, &spec);
        let b = unicycle_drive(&tilted, &kind(Family::B), 0.7, &spec);
        assert_eq!(a.force, -b.force);
        assert_eq!(a.torque, -b.torque);
    }

    #[test]
    fn shaking_force_is_uniform_rotating_and_torque_free() {
        assert_eq!(shaking_drive(0.0, 0.05, 0.1), Vec2::new(0.0, 0.05));
        for k in 0..100 {
            let t = 0.37 * k as f64;
            assert!((shaking_drive(t, 0.05, 0.1).length() - 0.05).abs() < 1e-15);
        }
        let spec = DriveSpec {
            mode: DriveMode::Shaking,
            ..Default::default()
        };
        let world = crate::physics::World::new(
            Default::default(),
            Default::default(),
            Default::default(),
            spec,
            build_chessboard_tileset(),
            vec![
                TileState::free(0, Vec2::new(0.1, 0.0), 0.3),
                TileState::free(3, Vec2::new(-0.1, 0.2), 2.0),
                TileState::fixed(4, Vec2::ZERO, 0.0),
            ],
        )
        .unwrap();
        let w = spec.wrenches(&world, 3.3);
        assert_eq!(w[0], w[1]);
        assert_eq!(w[0].torque, 0.0);
        assert_eq!(w[2], Wrench::default());
    }
}
