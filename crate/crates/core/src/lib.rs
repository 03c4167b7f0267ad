//! Deterministic 2D simulator and offline analysis toolkit for macroscale
//! tile-based self-assembly (TBSA).
//!
//! Square tiles carry magnetic glues at their edge midpoints and are driven
//! either by a uniform rotating "shaking" force or by a two-family unicycle
//! drive whose members push in opposite directions. A cross-shaped static seed
//! sits in the centre of a circular reactor; the analysis pipeline measures how
//! large, how erroneous and how holey the seeded assembly becomes over time.
//!
//! Module map:
//!
//! * [`model`] – tiles, glues, tilesets, seeds and the chessboard experiment.
//! * [`physics`] – fixed-timestep rigid-body core with sequential impulses.
//! * [`glue`] – pairwise magnet forces and the magnet-curve fit.
//! * [`drive`] – unicycle and shaking excitation engines.
//! * [`stability`] – net-force balance and the critical seed size.
//! * [`analysis`] – bond graph, seed component, holes, errors, aggregation.
//! * [`harness`] – experiment configs, deterministic runs and batches.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod drive;
pub mod error;
pub mod glue;
pub mod harness;
pub mod model;
pub mod physics;
pub mod rng;
pub mod snapshot;
pub mod stability;
pub mod svg;

pub use error::{Error, Result};

/// 2D vector type used throughout the crate.
pub use glam::DVec2 as Vec2;
