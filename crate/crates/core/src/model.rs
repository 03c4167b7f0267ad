//! Tiles, glues, tilesets, seeds and reactors.
//!
//! A tile kind is the abstract tile type: four edge glues in body frame plus
//! the motion family that decides how the drive pushes it. Glue labels are
//! signed integers; a pair attracts exactly when the labels cancel.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::physics::collision::boxes_overlap;
use crate::physics::TileState;
use crate::rng::SimRng;
use crate::{Error, Result, Vec2};

/// Edge glue. `0` is the glue-free edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlueLabel(pub i32);

impl GlueLabel {
    pub const NULL: GlueLabel = GlueLabel(0);

    pub fn is_null(self) -> bool {
        self.0 == 0
    }

    /// The label that bonds with this one.
    pub fn partner(self) -> GlueLabel {
        GlueLabel(-self.0)
    }

    /// True when both labels are real glues and cancel each other.
    pub fn matches(self, other: GlueLabel) -> bool {
        !self.is_null() && !other.is_null() && self.0 + other.0 == 0
    }
}

/// Edge index in the tile's body frame. North is the body `+y` side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::North, Edge::East, Edge::South, Edge::West];

    /// Outward unit normal in body frame.
    pub fn normal(self) -> Vec2 {
        match self {
            Edge::North => Vec2::new(0.0, 1.0),
            Edge::East => Vec2::new(1.0, 0.0),
            Edge::South => Vec2::new(0.0, -1.0),
            Edge::West => Vec2::new(-1.0, 0.0),
        }
    }

    pub fn opposite(self) -> Edge {
        Edge::ALL[(self as usize + 2) % 4]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    Seed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn flipped(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }
}

/// Unicycle parameters of a tile family: forward gain `a`, lateral gain `b`
/// (carried for completeness, the force law ignores it) and turn gain `omega`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub a: f64,
    pub b: f64,
    pub omega: f64,
}

impl DriveParams {
    pub const ZERO: DriveParams = DriveParams {
        a: 0.0,
        b: 0.0,
        omega: 0.0,
    };

    pub fn for_family(family: Family) -> DriveParams {
        match family {
            Family::A => DriveParams {
                a: 1.0,
                b: 1.0,
                omega: 1.0,
            },
            Family::B => DriveParams {
                a: -1.0,
                b: -1.0,
                omega: -1.0,
            },
            Family::Seed => DriveParams::ZERO,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileKind {
    pub id: usize,
    /// North, East, South, West.
    pub glues: [GlueLabel; 4],
    pub family: Family,
    pub color: Color,
    pub drive: DriveParams,
}

impl TileKind {
    pub fn glue(&self, edge: Edge) -> GlueLabel {
        self.glues[edge as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReactorSpec {
    pub radius: f64,
    pub wall_restitution: f64,
    pub wall_friction: f64,
}

impl Default for ReactorSpec {
    fn default() -> Self {
        ReactorSpec {
            radius: 0.6,
            wall_restitution: 0.2,
            wall_friction: 0.25,
        }
    }
}

impl ReactorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reactor radius must be positive, got {}",
                self.radius
            )));
        }
        if !(0.0..=1.0).contains(&self.wall_restitution) || !(self.wall_friction >= 0.0) {
            return Err(Error::InvalidParameter(
                "wall restitution must lie in [0, 1] and wall friction be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Integer lattice cell, relative to the seed's centre cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Cell {
        Cell { x, y }
    }

    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x - 1, self.y),
        ]
    }
}

/// Plus-shaped seed inscribed in an `n × n` bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSpec {
    pub bounding_size: u32,
    pub arm_width: u32,
    pub center: [f64; 2],
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec {
            bounding_size: 10,
            arm_width: 2,
            center: [0.0, 0.0],
        }
    }
}

impl SeedSpec {
    pub fn validate(&self) -> Result<()> {
        let (n, w) = (self.bounding_size, self.arm_width);
        if n == 0 || w == 0 {
            return Err(Error::InvalidSeed("bounding size and arm width must be ≥ 1".into()));
        }
        if w > n {
            return Err(Error::InvalidSeed(format!(
                "arm width {w} exceeds bounding size {n}"
            )));
        }
        // A centred band is only symmetric when both have the same parity.
        if (n - w) % 2 != 0 {
            return Err(Error::InvalidSeed(format!(
                "arm width {w} and bounding size {n} must have the same parity"
            )));
        }
        Ok(())
    }

    /// Anchor-relative lattice cells of the plus shape, row-major from the
    /// bottom-left corner.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let n = self.bounding_size as i32;
        let lo = (n - self.arm_width as i32) / 2;
        let hi = lo + self.arm_width as i32;
        let band = |i: i32| (lo..hi).contains(&i);
        let anchor = n / 2;
        let mut cells = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if band(i) || band(j) {
                    cells.push(Cell::new(i - anchor, j - anchor));
                }
            }
        }
        Ok(cells)
    }

    /// World position of the centre of the anchor cell `(0, 0)`.
    pub fn lattice_origin(&self, tile_width: f64) -> Vec2 {
        let n = self.bounding_size as i32;
        let offset = (n / 2) as f64 - (n - 1) as f64 / 2.0;
        Vec2::from(self.center) + Vec2::splat(offset * tile_width)
    }
}

/// Expected chessboard colouring: the seed's centre cell is black and colours
/// alternate along both lattice axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub anchor_color: Color,
}

impl GroundTruth {
    pub fn color_at(&self, cell: Cell) -> Color {
        if (cell.x + cell.y).rem_euclid(2) == 0 {
            self.anchor_color
        } else {
            self.anchor_color.flipped()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tileset {
    pub kinds: Vec<TileKind>,
    pub ground_truth: GroundTruth,
}

impl Tileset {
    pub fn kind(&self, id: usize) -> &TileKind {
        &self.kinds[id]
    }

    /// Free (driven) kinds, in id order.
    pub fn free_kinds(&self) -> impl Iterator<Item = &TileKind> {
        self.kinds.iter().filter(|k| k.family != Family::Seed)
    }

    /// Seed kind carrying `color`, if any.
    pub fn seed_kind(&self, color: Color) -> Option<&TileKind> {
        self.kinds
            .iter()
            .find(|k| k.family == Family::Seed && k.color == color)
    }

    /// Every non-null label has its partner somewhere in the set.
    pub fn is_closed(&self) -> bool {
        let labels: Vec<GlueLabel> = self
            .kinds
            .iter()
            .flat_map(|k| k.glues)
            .filter(|g| !g.is_null())
            .collect();
        labels.iter().all(|g| labels.contains(&g.partner()))
    }
}

/// Two-colour chessboard tileset: black/white × family A/B, plus one seed
/// kind per colour.
///
/// Black tiles carry `+1` on the vertical edges and `+2` on the horizontal
/// ones, white tiles the negated labels. Alternating colours therefore always
/// meet with cancelling labels while any same-colour neighbours repel. A
/// quarter turn swaps the `1` and `2` edges, so a rotated tile is repelled
/// from the lattice; a half turn maps the kind onto itself.
pub fn build_chessboard_tileset() -> Tileset {
    let black = [GlueLabel(1), GlueLabel(2), GlueLabel(1), GlueLabel(2)];
    let white = black.map(GlueLabel::partner);
    let specs = [
        (Color::Black, Family::A, black),
        (Color::Black, Family::B, black),
        (Color::White, Family::A, white),
        (Color::White, Family::B, white),
        (Color::Black, Family::Seed, black),
        (Color::White, Family::Seed, white),
    ];
    let kinds = specs
        .iter()
        .enumerate()
        .map(|(id, &(color, family, glues))| TileKind {
            id,
            glues,
            family,
            color,
            drive: DriveParams::for_family(family),
        })
        .collect();
    Tileset {
        kinds,
        ground_truth: GroundTruth {
            anchor_color: Color::Black,
        },
    }
}

/// Static tiles of the cross seed, coloured by the tileset's ground truth.
pub fn build_cross_seed(
    spec: &SeedSpec,
    tileset: &Tileset,
    tile_width: f64,
) -> Result<Vec<(TileKind, TileState)>> {
    let origin = spec.lattice_origin(tile_width);
    spec.cells()?
        .into_iter()
        .map(|cell| {
            let color = tileset.ground_truth.color_at(cell);
            let kind = *tileset.seed_kind(color).ok_or_else(|| {
                Error::InvalidSeed(format!("tileset has no {color:?} seed kind"))
            })?;
            let position = origin + Vec2::new(cell.x as f64, cell.y as f64) * tile_width;
            Ok((kind, TileState::fixed(kind.id, position, 0.0)))
        })
        .collect()
}

/// Clearance kept between scattered tiles so nothing starts in contact.
const PLACEMENT_CLEARANCE: f64 = 1e-3;
const ATTEMPTS_PER_TILE: usize = 5_000;

/// Rejection-samples `count` non-overlapping free tiles inside the reactor.
///
/// Kinds cycle through the tileset's free kinds in id order, so with the
/// chessboard set the two families (and the two colours) stay balanced.
pub fn scatter_free_tiles(
    count: usize,
    reactor: &ReactorSpec,
    tile_width: f64,
    occupied: &[TileState],
    tileset: &Tileset,
    rng: &mut SimRng,
) -> Result<Vec<TileState>> {
    let free: Vec<usize> = tileset.free_kinds().map(|k| k.id).collect();
    if count > 0 && free.is_empty() {
        return Err(Error::InvalidParameter("tileset has no free kinds".into()));
    }
    let half = tile_width / 2.0;
    let diag = tile_width * std::f64::consts::SQRT_2;
    let max_center_radius = reactor.radius - diag / 2.0 - PLACEMENT_CLEARANCE;
    if count > 0 && max_center_radius <= 0.0 {
        return Err(Error::InvalidParameter("reactor too small for a single tile".into()));
    }

    let cell = diag + PLACEMENT_CLEARANCE;
    let key = |p: Vec2| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<(Vec2, f64)>> = HashMap::new();
    for t in occupied {
        grid.entry(key(t.position)).or_default().push((t.position, t.angle));
    }

    let budget = ATTEMPTS_PER_TILE * count;
    let mut placed = Vec::with_capacity(count);
    let mut attempts = 0;
    while placed.len() < count {
        if attempts >= budget {
            return Err(Error::PlacementOverflow {
                placed: placed.len(),
                requested: count,
                attempts,
            });
        }
        attempts += 1;
        let r = max_center_radius * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let angle = std::f64::consts::TAU * rng.random::<f64>();
        let p = Vec2::new(r * theta.cos(), r * theta.sin());

        let (kx, ky) = key(p);
        let blocked = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                grid.get(&(kx + dx, ky + dy)).is_some_and(|bucket| {
                    bucket
                        .iter()
                        .any(|&(q, qa)| boxes_overlap(p, angle, q, qa, half, PLACEMENT_CLEARANCE))
                })
            })
        });
        if blocked {
            continue;
        }
        grid.entry((kx, ky)).or_default().push((p, angle));
        let kind = free[placed.len() % free.len()];
        placed.push(TileState::free(kind, p, angle));
    }
    Ok(placed)
}
