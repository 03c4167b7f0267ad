//! Fixed-timestep rigid-body core for square tiles in a circular reactor.
//!
//! One [`World::step`] performs, in order: force integration, floor friction
//! and damping, contact detection, sequential-impulse contact resolution, and
//! position integration from the resolved velocities. The clock is derived
//! from the step counter so it never drifts from `steps · dt`.

pub mod broadphase;
pub mod collision;
mod solver;

use serde::{Deserialize, Serialize};

use crate::drive::DriveSpec;
use crate::glue::MagnetParams;
use crate::model::{ReactorSpec, Tileset};
use crate::{Error, Result, Vec2};

use collision::{Contact, Other, Square};
use solver::{Bodies, ImpulseCache, Material, SolverSettings};

/// Pose and velocities of one tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileState {
    pub kind: usize,
    pub position: Vec2,
    /// Radians, counter-clockwise, wrapped to `[0, 2π)` after each step.
    pub angle: f64,
    pub velocity: Vec2,
    pub angular_velocity: f64,
    pub is_static: bool,
}

impl TileState {
    pub fn free(kind: usize, position: Vec2, angle: f64) -> TileState {
        TileState {
            kind,
            position,
            angle,
            velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            is_static: false,
        }
    }

    pub fn fixed(kind: usize, position: Vec2, angle: f64) -> TileState {
        TileState {
            is_static: true,
            ..TileState::free(kind, position, angle)
        }
    }
}

/// Force (N) and torque (N·m) acting on one tile for a step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Wrench {
    pub force: Vec2,
    pub torque: f64,
}

impl std::ops::AddAssign for Wrench {
    fn add_assign(&mut self, rhs: Wrench) {
        self.force += rhs.force;
        self.torque += rhs.torque;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    pub restitution: f64,
    pub friction_tile_tile: f64,
    pub friction_tile_floor: f64,
    pub angular_friction_floor: f64,
    /// kg
    pub tile_mass: f64,
    /// m
    pub tile_width: f64,
    /// Continuous rate (1/s); velocities decay by `exp(-rate · dt)` per step.
    pub linear_damping: f64,
    pub angular_damping: f64,
    pub dt: f64,
    pub solver_iterations: usize,
    pub gravity: f64,
    /// Any tile faster than this (m/s) aborts the run.
    pub velocity_cap: f64,
    /// Fraction of penetration removed per step.
    pub baumgarte: f64,
    /// Penetration tolerated without correction (m).
    pub slop: f64,
    /// Gap (m) within which contacts are generated ahead of touching.
    pub speculative_distance: f64,
    /// Approach speed (m/s) below which impacts do not bounce.
    pub restitution_threshold: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            restitution: 0.2,
            friction_tile_tile: 0.25,
            friction_tile_floor: 0.25,
            angular_friction_floor: 0.25,
            tile_mass: 0.016,
            tile_width: 0.03,
            linear_damping: 0.8,
            angular_damping: 0.5,
            dt: 1.0 / 120.0,
            solver_iterations: 8,
            gravity: 9.81,
            velocity_cap: 100.0,
            baumgarte: 0.2,
            slop: 1e-4,
            speculative_distance: 2e-3,
            restitution_threshold: 0.02,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("restitution", self.restitution),
            ("friction_tile_tile", self.friction_tile_tile),
            ("friction_tile_floor", self.friction_tile_floor),
            ("angular_friction_floor", self.angular_friction_floor),
            ("linear_damping", self.linear_damping),
            ("angular_damping", self.angular_damping),
            ("gravity", self.gravity),
            ("baumgarte", self.baumgarte),
            ("slop", self.slop),
            ("speculative_distance", self.speculative_distance),
            ("restitution_threshold", self.restitution_threshold),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [
            ("tile_mass", self.tile_mass),
            ("tile_width", self.tile_width),
            ("dt", self.dt),
            ("velocity_cap", self.velocity_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.restitution > 1.0 {
            return Err(Error::InvalidParameter("restitution must lie in [0, 1]".into()));
        }
        if self.speculative_distance >= self.tile_width / 2.0 {
            return Err(Error::InvalidParameter(
                "speculative_distance must be below half a tile width".into(),
            ));
        }
        Ok(())
    }

    /// Moment of inertia of a uniform square about its centre.
    pub fn inertia(&self) -> f64 {
        self.tile_mass * self.tile_width * self.tile_width / 6.0
    }

    pub fn half_width(&self) -> f64 {
        self.tile_width / 2.0
    }

    /// Mean distance of the square's area from its centre; the lever arm of
    /// uniform Coulomb floor friction resisting rotation.
    pub fn friction_lever_arm(&self) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        self.tile_width * (s2 + (1.0 + s2).ln()) / 6.0
    }

    /// Centre distance below which two tiles may be in contact.
    pub fn contact_range(&self) -> f64 {
        self.tile_width * std::f64::consts::SQRT_2 + self.speculative_distance
    }
}

/// Upper bound on substeps per step; reached only near the velocity cap.
const MAX_SUBSTEPS: usize = 128;

/// Complete simulation state.
#[derive(Clone, Debug)]
pub struct World {
    pub reactor: ReactorSpec,
    pub params: PhysicsParams,
    pub magnets: MagnetParams,
    pub drive: DriveSpec,
    pub tileset: Tileset,
    pub tiles: Vec<TileState>,
    steps: u64,
    cache: ImpulseCache,
}

impl World {
    pub fn new(
        reactor: ReactorSpec,
        params: PhysicsParams,
        magnets: MagnetParams,
        drive: DriveSpec,
        tileset: Tileset,
        tiles: Vec<TileState>,
    ) -> Result<World> {
        reactor.validate()?;
        params.validate()?;
        magnets.validate()?;
        drive.validate()?;
        if let Some(t) = tiles.iter().find(|t| t.kind >= tileset.kinds.len()) {
            return Err(Error::InvalidParameter(format!("unknown tile kind {}", t.kind)));
        }
        let mut tiles = tiles;
        for t in tiles.iter_mut().filter(|t| t.is_static) {
            t.velocity = Vec2::ZERO;
            t.angular_velocity = 0.0;
        }
        Ok(World {
            reactor,
            params,
            magnets,
            drive,
            tileset,
            tiles,
            steps: 0,
            cache: ImpulseCache::default(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Simulated time in seconds, `steps · dt`.
    pub fn clock(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    pub fn squares(&self) -> Vec<Square> {
        let h = self.params.half_width();
        self.tiles
            .iter()
            .map(|t| Square::new(t.position, t.angle, h))
            .collect()
    }

    pub fn kinetic_energy(&self) -> f64 {
        let m = self.params.tile_mass;
        let i = self.params.inertia();
        self.tiles
            .iter()
            .filter(|t| !t.is_static)
            .map(|t| 0.5 * m * t.velocity.length_squared() + 0.5 * i * t.angular_velocity.powi(2))
            .sum()
    }

    pub fn linear_momentum(&self) -> Vec2 {
        self.tiles
            .iter()
            .filter(|t| !t.is_static)
            .map(|t| t.velocity * self.params.tile_mass)
            .sum()
    }

    /// Tile–tile contacts (spatial-hash broad phase) followed by wall
    /// contacts, in a deterministic order.
    pub fn detect_contacts(&self) -> Vec<Contact> {
        self.detect_contacts_over(self.params.dt)
    }

    fn detect_contacts_over(&self, dt: f64) -> Vec<Contact> {
        let centers: Vec<Vec2> = self.tiles.iter().map(|t| t.position).collect();
        let pairs = broadphase::pairs_within(&centers, self.params.contact_range());
        self.contacts_for_pairs(&pairs, dt)
    }

    /// Same as [`World::detect_contacts`] but testing every pair.
    pub fn detect_contacts_all_pairs(&self) -> Vec<Contact> {
        let n = self.tiles.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        self.contacts_for_pairs(&pairs, self.params.dt)
    }

    /// Fastest speed of any free tile corner (m/s).
    fn max_corner_speed(&self) -> f64 {
        let reach = self.params.half_width() * std::f64::consts::SQRT_2;
        self.tiles
            .iter()
            .filter(|t| !t.is_static)
            .map(|t| t.velocity.length() + t.angular_velocity.abs() * reach)
            .fold(0.0, f64::max)
    }

    fn contacts_for_pairs(&self, pairs: &[(usize, usize)], dt: f64) -> Vec<Contact> {
        let squares = self.squares();
        let margin = self.params.speculative_distance;
        let mut contacts: Vec<Contact> = pairs
            .iter()
            .filter(|&&(i, j)| !(self.tiles[i].is_static && self.tiles[j].is_static))
            .filter_map(|&(i, j)| collision::collide_squares(i, &squares[i], j, &squares[j], margin))
            .collect();
        // The wall margin covers the distance any corner can travel in one
        // step. It uses the fastest tile because a collision can hand that
        // speed to a resting neighbour during the solve.
        let sweep = self.max_corner_speed() * dt;
        for (i, sq) in squares.iter().enumerate() {
            if !self.tiles[i].is_static {
                collision::collide_wall(i, sq, self.reactor.radius, margin + sweep, &mut contacts);
            }
        }
        contacts
    }

    /// Advances the world by one `dt` under the given per-tile wrenches.
    ///
    /// When some corner would travel more than half a tile width the step is
    /// split into equal substeps, which keeps the speculative contacts valid
    /// against the curved wall. Wrenches on static tiles are ignored. Fails
    /// with [`Error::NumericalDivergence`] when a tile exceeds the velocity
    /// cap.
    pub fn step(&mut self, wrenches: &[Wrench]) -> Result<()> {
        let n = self.tiles.len();
        if wrenches.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} wrenches, got {}",
                wrenches.len()
            )));
        }
        if let Some(i) = wrenches
            .iter()
            .position(|w| !(w.force.is_finite() && w.torque.is_finite()))
        {
            return Err(Error::InvalidParameter(format!("non-finite wrench on tile {i}")));
        }

        let travel = self.max_corner_speed() * self.params.dt;
        let substeps = (travel / self.params.half_width()).ceil().clamp(1.0, MAX_SUBSTEPS as f64) as usize;
        let dt = self.params.dt / substeps as f64;
        for _ in 0..substeps {
            self.substep(wrenches, dt)?;
        }
        self.steps += 1;
        Ok(())
    }

    fn substep(&mut self, wrenches: &[Wrench], dt: f64) -> Result<()> {
        let n = self.tiles.len();
        let p = self.params;
        let inertia = p.inertia();
        let pre_velocity: Vec<Vec2> = self.tiles.iter().map(|t| t.velocity).collect();
        let pre_angular: Vec<f64> = self.tiles.iter().map(|t| t.angular_velocity).collect();
        let mut velocity = pre_velocity.clone();
        let mut angular = pre_angular.clone();
        let mut inv_mass = vec![0.0; n];
        let mut inv_inertia = vec![0.0; n];

        let linear_decay = (-p.linear_damping * dt).exp();
        let angular_decay = (-p.angular_damping * dt).exp();
        let floor_dv = p.friction_tile_floor * p.gravity * dt;
        let floor_dw = p.angular_friction_floor * p.tile_mass * p.gravity * p.friction_lever_arm() * dt / inertia;

        for (i, t) in self.tiles.iter().enumerate() {
            if t.is_static {
                continue;
            }
            inv_mass[i] = 1.0 / p.tile_mass;
            inv_inertia[i] = 1.0 / inertia;

            let mut v = velocity[i] + wrenches[i].force * (dt / p.tile_mass);
            let mut w = angular[i] + wrenches[i].torque * (dt / inertia);

            // Coulomb floor friction: removes up to μ·g·dt of speed, never
            // reversing the motion.
            let speed = v.length();
            if speed > 0.0 {
                v *= (speed - floor_dv).max(0.0) / speed;
            }
            w = w.signum() * (w.abs() - floor_dw).max(0.0);

            velocity[i] = v * linear_decay;
            angular[i] = w * angular_decay;
        }

        let contacts = self.detect_contacts_over(dt);
        let centers: Vec<Vec2> = self.tiles.iter().map(|t| t.position).collect();
        let mut bodies = Bodies {
            velocity: &mut velocity,
            angular: &mut angular,
            pre_velocity: &pre_velocity,
            pre_angular: &pre_angular,
            inv_mass: &inv_mass,
            inv_inertia: &inv_inertia,
            centers: &centers,
        };
        let reactor = self.reactor;
        let materials = |c: &Contact| match c.b {
            Other::Tile(_) => Material {
                friction: p.friction_tile_tile,
                restitution: p.restitution,
            },
            Other::Wall => Material {
                friction: reactor.wall_friction,
                restitution: reactor.wall_restitution,
            },
        };
        let settings = SolverSettings {
            dt,
            iterations: p.solver_iterations,
            baumgarte: p.baumgarte,
            slop: p.slop,
            restitution_threshold: p.restitution_threshold,
        };
        let (pseudo_v, pseudo_w) = solver::solve(&contacts, materials, &mut bodies, &mut self.cache, &settings);

        let mut divergence = None;
        for (i, t) in self.tiles.iter_mut().enumerate() {
            if t.is_static {
                continue;
            }
            t.velocity = velocity[i];
            t.angular_velocity = angular[i];
            t.position += (velocity[i] + pseudo_v[i]) * dt;
            t.angle = (t.angle + (angular[i] + pseudo_w[i]) * dt).rem_euclid(std::f64::consts::TAU);
            let speed = t.velocity.length();
            if divergence.is_none() && !(speed <= p.velocity_cap && t.angular_velocity.is_finite()) {
                divergence = Some((i, speed));
            }
        }
        match divergence {
            Some((tile, speed)) => Err(Error::NumericalDivergence {
                step: self.steps + 1,
                tile,
                speed,
            }),
            None => Ok(()),
        }
    }
}
