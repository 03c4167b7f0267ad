//! Offline analysis of snapshots: bonds, the seed assembly, holes, errors and
//! batch statistics.
//!
//! Bonds are reconstructed from geometry alone. Two tiles are bonded when
//! their closest edge midpoints nearly touch, their orientations agree up to a
//! quarter turn, and the two facing glues cancel. The assembly is everything
//! reachable from the static seed tiles over bonds, snapped to the lattice
//! spanned by the seed.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::{Cell, Edge, GlueLabel, Tileset};
use crate::physics::broadphase::pairs_within;
use crate::physics::TileState;
use crate::snapshot::Snapshot;
use crate::{Error, Result, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    /// Largest edge-midpoint gap of a bond, as a fraction of the tile width.
    pub gap_tolerance: f64,
    /// Largest misalignment of a bond from a multiple of 90°, in degrees.
    pub angle_tolerance_deg: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            gap_tolerance: 0.2,
            angle_tolerance_deg: 15.0,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tolerance > 0.0 && self.gap_tolerance.is_finite())
            || !(self.angle_tolerance_deg > 0.0 && self.angle_tolerance_deg < 45.0)
        {
            return Err(Error::InvalidParameter(format!(
                "analysis needs gap tolerance > 0 and 0 < angle tolerance < 45°: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub edge_a: Edge,
    pub edge_b: Edge,
    pub labels: (GlueLabel, GlueLabel),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BondGraph {
    pub nodes: usize,
    /// Sorted by `(a, b)` with `a < b`.
    pub edges: Vec<Bond>,
}

impl BondGraph {
    pub fn from_pairs(nodes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> BondGraph {
        let mut edges: Vec<Bond> = pairs
            .into_iter()
            .map(|(a, b)| Bond {
                a: a.min(b),
                b: a.max(b),
                edge_a: Edge::North,
                edge_b: Edge::South,
                labels: (GlueLabel::NULL, GlueLabel::NULL),
            })
            .collect();
        edges.sort_by_key(|e| (e.a, e.b));
        BondGraph { nodes, edges }
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }
}

fn edge_midpoint(tile: &TileState, edge: Edge, half: f64) -> Vec2 {
    tile.position + Vec2::from_angle(tile.angle).rotate(edge.normal() * half)
}

/// Misalignment of two orientations from the nearest multiple of 90°.
fn quarter_turn_deviation(a: f64, b: f64) -> f64 {
    let r = (b - a).rem_euclid(std::f64::consts::FRAC_PI_2);
    r.min(std::f64::consts::FRAC_PI_2 - r)
}

/// Bond graph of a configuration. `gap_tol` is absolute (m), `angle_tol` in
/// radians.
pub fn detect_bonds(
    tiles: &[TileState],
    tileset: &Tileset,
    tile_width: f64,
    gap_tol: f64,
    angle_tol: f64,
) -> BondGraph {
    let half = 0.5 * tile_width;
    let centers: Vec<Vec2> = tiles.iter().map(|t| t.position).collect();
    let reach = tile_width * std::f64::consts::SQRT_2 + gap_tol;
    let mut edges = Vec::new();
    for (i, j) in pairs_within(&centers, reach) {
        let (ti, tj) = (&tiles[i], &tiles[j]);
        if quarter_turn_deviation(ti.angle, tj.angle) > angle_tol {
            continue;
        }
        let mut best = (f64::INFINITY, Edge::North, Edge::North);
        for ei in Edge::ALL {
            let mi = edge_midpoint(ti, ei, half);
            for ej in Edge::ALL {
                let d = mi.distance(edge_midpoint(tj, ej, half));
                if d < best.0 {
                    best = (d, ei, ej);
                }
            }
        }
        let (gap, ei, ej) = best;
        let (gi, gj) = (tileset.kind(ti.kind).glue(ei), tileset.kind(tj.kind).glue(ej));
        if gap < gap_tol && gi.matches(gj) {
            edges.push(Bond {
                a: i,
                b: j,
                edge_a: ei,
                edge_b: ej,
                labels: (gi, gj),
            });
        }
    }
    BondGraph {
        nodes: tiles.len(),
        edges,
    }
}

/// Tiles reachable from `seeds` over bonds, sorted. Empty when `seeds` is.
pub fn seed_component(graph: &BondGraph, seeds: &[usize]) -> Vec<usize> {
    let adj = graph.adjacency();
    let mut seen = vec![false; graph.nodes];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..graph.nodes).filter(|&i| seen[i]).collect()
}

/// Square lattice aligned with the seed, cell `(0, 0)` at the seed's anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub origin: Vec2,
    pub angle: f64,
    pub pitch: f64,
}

impl Lattice {
    /// Lattice spanned by the seed tiles. The anchor is the cell at index
    /// `⌊extent/2⌋` of the seed's bounding box on each axis, which is the
    /// anchor used when the seed was built.
    pub fn from_seed(tiles: &[TileState], seeds: &[usize], pitch: f64) -> Option<Lattice> {
        let &first = seeds.iter().min()?;
        let base = tiles[first];
        let frame = Lattice {
            origin: base.position,
            angle: base.angle,
            pitch,
        };
        let cells: Vec<Cell> = seeds.iter().map(|&s| frame.cell_of(tiles[s].position)).collect();
        let axis = |f: fn(&Cell) -> i32| {
            let lo = cells.iter().map(f).min().unwrap_or(0);
            let hi = cells.iter().map(f).max().unwrap_or(0);
            lo + (hi - lo + 1) / 2
        };
        let anchor = Cell::new(axis(|c| c.x), axis(|c| c.y));
        Some(Lattice {
            origin: frame.center_of(anchor),
            ..frame
        })
    }

    pub fn cell_of(&self, p: Vec2) -> Cell {
        let local = Vec2::from_angle(-self.angle).rotate(p - self.origin) / self.pitch;
        Cell::new(local.x.round() as i32, local.y.round() as i32)
    }

    pub fn center_of(&self, c: Cell) -> Vec2 {
        self.origin + Vec2::from_angle(self.angle).rotate(Vec2::new(c.x as f64, c.y as f64) * self.pitch)
    }
}

/// Assigns every component tile its nearest lattice cell.
pub fn snap_to_lattice(
    tiles: &[TileState],
    component: &[usize],
    lattice: &Lattice,
) -> Result<BTreeMap<Cell, usize>> {
    let mut cells = BTreeMap::new();
    for &i in component {
        let cell = lattice.cell_of(tiles[i].position);
        if let Some(&first) = cells.get(&cell) {
            return Err(Error::LatticeSnapFailure {
                first,
                second: i,
                x: cell.x,
                y: cell.y,
            });
        }
        cells.insert(cell, i);
    }
    Ok(cells)
}

/// Lattice assignment that tolerates collisions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Occupancy {
    pub cells: BTreeMap<Cell, usize>,
    /// Tiles that lost their nearest cell to a tile closer to its centre.
    pub displaced: Vec<usize>,
}

/// Like [`snap_to_lattice`], but a collision keeps the tile nearest the cell
/// centre (lower id on ties) and reports the others as displaced.
pub fn snap_resolving(tiles: &[TileState], component: &[usize], lattice: &Lattice) -> Occupancy {
    let mut occ = Occupancy::default();
    for &i in component {
        let cell = lattice.cell_of(tiles[i].position);
        let centre = lattice.center_of(cell);
        match occ.cells.get(&cell).copied() {
            None => {
                occ.cells.insert(cell, i);
            }
            Some(j) => {
                let (di, dj) = (tiles[i].position.distance(centre), tiles[j].position.distance(centre));
                if di < dj {
                    occ.cells.insert(cell, i);
                    occ.displaced.push(j);
                } else {
                    occ.displaced.push(i);
                }
            }
        }
    }
    occ.displaced.sort_unstable();
    occ
}

/// Empty cells whose four orthogonal neighbours are all occupied.
pub fn detect_holes(occupied: &HashSet<Cell>) -> usize {
    let mut candidates: Vec<Cell> = occupied
        .iter()
        .flat_map(|c| c.neighbors())
        .filter(|c| !occupied.contains(c))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    candidates
        .into_iter()
        .filter(|c| c.neighbors().iter().all(|n| occupied.contains(n)))
        .count()
}

/// Component tiles whose colour disagrees with the ground truth at their cell.
pub fn classify_errors(cells: &BTreeMap<Cell, usize>, tiles: &[TileState], tileset: &Tileset) -> usize {
    cells
        .iter()
        .filter(|&(&cell, &i)| tileset.kind(tiles[i].kind).color != tileset.ground_truth.color_at(cell))
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub time: f64,
    /// Seed component size, seed and errors included.
    pub size: usize,
    pub size_without_seed: usize,
    /// Wrong-colour tiles plus displaced ones.
    pub errors: usize,
    /// Component tiles that collided with a closer tile on the lattice.
    pub displaced: usize,
    pub holes: usize,
    pub error_pct: f64,
    pub hole_pct: f64,
}

/// The three metrics of one configuration. Seed tiles are the static ones.
/// Lattice collisions are resolved with [`snap_resolving`].
pub fn analyze_tiles(
    time: f64,
    tiles: &[TileState],
    tileset: &Tileset,
    tile_width: f64,
    params: &AnalysisParams,
) -> Result<MetricsRow> {
    let seeds: Vec<usize> = (0..tiles.len()).filter(|&i| tiles[i].is_static).collect();
    let lattice = Lattice::from_seed(tiles, &seeds, tile_width)
        .ok_or_else(|| Error::InvalidSeed("configuration has no static seed tiles".into()))?;
    let graph = detect_bonds(
        tiles,
        tileset,
        tile_width,
        params.gap_tolerance * tile_width,
        params.angle_tolerance_deg.to_radians(),
    );
    let component = seed_component(&graph, &seeds);
    let occ = snap_resolving(tiles, &component, &lattice);
    let occupied: HashSet<Cell> = occ.cells.keys().copied().collect();
    let holes = detect_holes(&occupied);
    let errors = classify_errors(&occ.cells, tiles, tileset) + occ.displaced.len();
    let size = component.len();
    let pct = |k: usize| 100.0 * k as f64 / size as f64;
    Ok(MetricsRow {
        time,
        size,
        size_without_seed: size - seeds.len(),
        errors,
        displaced: occ.displaced.len(),
        holes,
        error_pct: pct(errors),
        hole_pct: pct(holes),
    })
}

pub fn analyze_snapshot(
    snapshot: &Snapshot,
    tileset: &Tileset,
    tile_width: f64,
    params: &AnalysisParams,
) -> Result<MetricsRow> {
    analyze_tiles(snapshot.time, &snapshot.tiles, tileset, tile_width, params)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub time: f64,
    pub runs: usize,
    pub size: Stat,
    pub size_without_seed: Stat,
    pub error_pct: Stat,
    pub hole_pct: Stat,
}

/// Pointwise statistics across runs sharing one snapshot grid.
pub fn aggregate(runs: &[Vec<MetricsRow>]) -> Result<Vec<AggregateRow>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::MismatchedGrid("no runs to aggregate".into()))?;
    for (k, run) in runs.iter().enumerate() {
        let same = run.len() == first.len()
            && run.iter().zip(first).all(|(a, b)| a.time.to_bits() == b.time.to_bits());
        if !same {
            return Err(Error::MismatchedGrid(format!(
                "series {k} does not share the time grid of series 0"
            )));
        }
    }
    Ok((0..first.len())
        .map(|i| {
            let column = |f: fn(&MetricsRow) -> f64| Stat::of(&runs.iter().map(|r| f(&r[i])).collect::<Vec<_>>());
            AggregateRow {
                time: first[i].time,
                runs: runs.len(),
                size: column(|m| m.size as f64),
                size_without_seed: column(|m| m.size_without_seed as f64),
                error_pct: column(|m| m.error_pct),
                hole_pct: column(|m| m.hole_pct),
            }
        })
        .collect())
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "time",
        "runs",
        "size_mean",
        "size_std",
        "size_without_seed_mean",
        "size_without_seed_std",
        "error_pct_mean",
        "error_pct_std",
        "hole_pct_mean",
        "hole_pct_std",
    ])?;
    for r in rows {
        let mut rec = vec![r.time.to_string(), r.runs.to_string()];
        for s in [r.size, r.size_without_seed, r.error_pct, r.hole_pct] {
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<aggregate>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chessboard_tileset, build_cross_seed, SeedSpec};
    use proptest::prelude::*;

    const W: f64 = 0.03;
    const BLACK: usize = 0;
    const WHITE: usize = 2;

    fn bonds(tiles: &[TileState]) -> BondGraph {
        detect_bonds(tiles, &build_chessboard_tileset(), W, 0.2 * W, 15f64.to_radians())
    }

    #[test]
    fn flush_complementary_pair_bonds() {
        let tiles = [
            TileState::free(BLACK, Vec2::ZERO, 0.0),
            TileState::free(WHITE, Vec2::new(W, 0.0), 0.0),
        ];
        let g = bonds(&tiles);
        assert_eq!(g.edges.len(), 1);
        let e = g.edges[0];
        assert_eq!((e.a, e.b, e.edge_a, e.edge_b), (0, 1, Edge::East, Edge::West));
        assert_eq!(e.labels, (GlueLabel(2), GlueLabel(-2)));

        // A quarter turn of both tiles still bonds, via other edges.
        let turned: Vec<TileState> = tiles
            .iter()
            .map(|t| TileState { angle: std::f64::consts::FRAC_PI_2, ..*t })
            .collect();
        assert_eq!(bonds(&turned).edges.len(), 1);
    }

    #[test]
    fn repelling_pair_does_not_bond() {
        let tiles = [
            TileState::free(BLACK, Vec2::ZERO, 0.0),
            TileState::free(BLACK, Vec2::new(W, 0.0), 0.0),
        ];
        assert!(bonds(&tiles).edges.is_empty());
    }

    #[test]
    fn gap_and_angle_thresholds() {
        let at = |gap: f64, angle: f64| {
            bonds(&[
                TileState::free(BLACK, Vec2::ZERO, 0.0),
                TileState::free(WHITE, Vec2::new(W + gap, 0.0), angle),
            ])
            .edges
            .len()
        };
        assert_eq!(at(0.1 * W, 0.0), 1);
        assert_eq!(at(0.4 * W, 0.0), 0);
        assert_eq!(at(0.0, 10f64.to_radians()), 1);
        assert_eq!(at(0.0, 25f64.to_radians()), 0);
    }

    #[test]
    fn seed_component_examples() {
        let g = BondGraph::from_pairs(6, []);
        assert_eq!(seed_component(&g, &[0, 1]), vec![0, 1]);
        let g = BondGraph::from_pairs(6, [(0, 2), (2, 3), (4, 5)]);
        assert_eq!(seed_component(&g, &[0]), vec![0, 2, 3]);
        assert!(seed_component(&g, &[]).is_empty());
    }

    proptest! {
        #[test]
        fn seed_component_is_monotone(
            n in 2usize..30,
            raw in prop::collection::vec((0usize..30, 0usize..30), 0..40),
            extra in prop::collection::vec((0usize..30, 0usize..30), 1..10),
        ) {
            let clip = |v: &[(usize, usize)]| v.iter().map(|&(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect::<Vec<_>>();
            let base = clip(&raw);
            let mut more = base.clone();
            more.extend(clip(&extra));
            let small = seed_component(&BondGraph::from_pairs(n, base), &[0]);
            let large = seed_component(&BondGraph::from_pairs(n, more), &[0]);
            prop_assert!(small.iter().all(|i| large.contains(i)));
        }
    }

    fn occupancy(cells: &[(i32, i32)]) -> HashSet<Cell> {
        cells.iter().map(|&(x, y)| Cell::new(x, y)).collect()
    }

    #[test]
    fn hole_examples() {
        let ring: Vec<(i32, i32)> = (0..3).flat_map(|x| (0..3).map(move |y| (x, y))).filter(|&c| c != (1, 1)).collect();
        let occ = occupancy(&ring);
        assert_eq!(detect_holes(&occ), 1);
        assert_eq!(100.0 * detect_holes(&occ) as f64 / occ.len() as f64, 12.5);

        let full: Vec<(i32, i32)> = (0..4).flat_map(|x| (0..3).map(move |y| (x, y))).collect();
        assert_eq!(detect_holes(&occupancy(&full)), 0);

        // An enclosed 2×1 void is not a hole under the four-neighbour rule.
        let slot: Vec<(i32, i32)> = (0..4).flat_map(|x| (0..3).map(move |y| (x, y))).filter(|&c| c != (1, 1) && c != (2, 1)).collect();
        assert_eq!(detect_holes(&occupancy(&slot)), 0);
    }

    fn seeded_world(spec: &SeedSpec) -> (Vec<TileState>, Lattice) {
        let ts = build_chessboard_tileset();
        let tiles: Vec<TileState> = build_cross_seed(spec, &ts, W).unwrap().into_iter().map(|(_, t)| t).collect();
        let seeds: Vec<usize> = (0..tiles.len()).collect();
        let lattice = Lattice::from_seed(&tiles, &seeds, W).unwrap();
        (tiles, lattice)
    }

    #[test]
    fn lattice_recovers_seed_anchor() {
        for (n, arm) in [(10, 2), (4, 2), (5, 1), (7, 3)] {
            let spec = SeedSpec {
                bounding_size: n,
                arm_width: arm,
                center: [0.013, -0.2],
            };
            let (tiles, lattice) = seeded_world(&spec);
            assert!((lattice.origin - spec.lattice_origin(W)).length() < 1e-12);
            let cells: Vec<Cell> = tiles.iter().map(|t| lattice.cell_of(t.position)).collect();
            assert_eq!(cells, spec.cells().unwrap());
        }
    }

    #[test]
    fn snap_collision_is_reported() {
        let tiles = [
            TileState::fixed(4, Vec2::ZERO, 0.0),
            TileState::free(BLACK, Vec2::new(0.004, 0.0), 0.0),
        ];
        let lattice = Lattice::from_seed(&tiles, &[0], W).unwrap();
        assert!(matches!(
            snap_to_lattice(&tiles, &[0, 1], &lattice),
            Err(Error::LatticeSnapFailure { first: 0, second: 1, x: 0, y: 0 })
        ));
        let occ = snap_resolving(&tiles, &[1, 0], &lattice);
        assert_eq!(occ.cells.get(&Cell::new(0, 0)), Some(&0));
        assert_eq!(occ.displaced, vec![1]);
    }

    #[test]
    fn displaced_tiles_count_as_errors() {
        let mut tiles = vec![
            TileState::fixed(4, Vec2::ZERO, 0.0),
            TileState::free(WHITE, Vec2::new(W, 0.0), 0.0),
        ];
        // A second white tile bonded to the seed's north edge but slid
        // sideways, so its nearest cell is the east neighbour's.
        tiles.push(TileState::free(WHITE, Vec2::new(0.55 * W, W), 0.0));
        let m = analyze_tiles(0.0, &tiles, &build_chessboard_tileset(), W, &AnalysisParams::default());
        // Too far for a bond: no collision, only the flush neighbour counts.
        assert_eq!(m.unwrap().size, 2);
        tiles[2].position = Vec2::new(0.9 * W, 0.1 * W);
        let lattice = Lattice::from_seed(&tiles, &[0], W).unwrap();
        let occ = snap_resolving(&tiles, &[0, 1, 2], &lattice);
        assert_eq!(occ.displaced, vec![2]);
    }

    /// Seed plus a ring of free tiles in the arm corner, all correctly
    /// coloured unless `wrong` names a cell to colour-flip.
    fn grown(wrong: Option<Cell>) -> (Vec<TileState>, usize) {
        let ts = build_chessboard_tileset();
        let spec = SeedSpec {
            bounding_size: 4,
            arm_width: 2,
            center: [0.0, 0.0],
        };
        let (mut tiles, lattice) = seeded_world(&spec);
        let seed_count = tiles.len();
        for cell in [Cell::new(1, 1), Cell::new(-2, -2), Cell::new(-2, 1)] {
            let mut color = ts.ground_truth.color_at(cell);
            if Some(cell) == wrong {
                color = color.flipped();
            }
            let kind = ts.free_kinds().find(|k| k.color == color).unwrap().id;
            tiles.push(TileState::free(kind, lattice.center_of(cell), 0.0));
        }
        (tiles, seed_count)
    }

    #[test]
    fn perfect_continuation_has_no_errors() {
        let (tiles, seeds) = grown(None);
        let m = analyze_tiles(5.0, &tiles, &build_chessboard_tileset(), W, &AnalysisParams::default()).unwrap();
        assert_eq!(m.size, seeds + 3);
        assert_eq!(m.size_without_seed, 3);
        assert_eq!((m.errors, m.holes), (0, 0));
        assert_eq!(m.error_pct, 0.0);
    }

    #[test]
    fn wrong_colour_is_an_error() {
        let ts = build_chessboard_tileset();
        let (tiles, seeds) = grown(None);
        let lattice = Lattice::from_seed(&tiles, &(0..seeds).collect::<Vec<_>>(), W).unwrap();
        let all: Vec<usize> = (0..tiles.len()).collect();
        let mut cells = snap_to_lattice(&tiles, &all, &lattice).unwrap();
        assert_eq!(classify_errors(&cells, &tiles, &ts), 0);

        // A black tile forced onto a white-parity cell.
        let mut tiles = tiles;
        tiles.push(TileState::free(BLACK, lattice.center_of(Cell::new(2, 1)), 0.0));
        cells.insert(Cell::new(2, 1), tiles.len() - 1);
        assert_eq!(ts.ground_truth.color_at(Cell::new(2, 1)), crate::model::Color::White);
        assert_eq!(classify_errors(&cells, &tiles, &ts), 1);
    }

    #[test]
    fn mismatched_free_tile_is_not_in_the_assembly() {
        // A wrong-coloured tile repels its neighbours, so it never bonds.
        let (tiles, seeds) = grown(Some(Cell::new(1, 1)));
        let m = analyze_tiles(0.0, &tiles, &build_chessboard_tileset(), W, &AnalysisParams::default()).unwrap();
        assert_eq!(m.size, seeds + 2);
    }

    fn row(time: f64, size: usize) -> MetricsRow {
        MetricsRow {
            time,
            size,
            size_without_seed: size - 12,
            errors: 0,
            displaced: 0,
            holes: 1,
            error_pct: 0.0,
            hole_pct: 100.0 / size as f64,
        }
    }

    #[test]
    fn aggregate_examples() {
        let single = vec![row(0.0, 12), row(10.0, 20)];
        let agg = aggregate(std::slice::from_ref(&single)).unwrap();
        assert_eq!(agg[1].size, Stat { mean: 20.0, std: 0.0 });
        assert_eq!(agg[1].hole_pct.mean, single[1].hole_pct);

        let agg = aggregate(&[vec![row(10.0, 60)], vec![row(10.0, 80)]]).unwrap();
        assert_eq!(agg[0].size, Stat { mean: 70.0, std: 10.0 });
        assert_eq!(agg[0].runs, 2);

        assert!(matches!(aggregate(&[vec![row(0.0, 20)], vec![row(10.0, 20)]]), Err(Error::MismatchedGrid(_))));
        assert!(matches!(aggregate(&[vec![row(0.0, 20)], vec![]]), Err(Error::MismatchedGrid(_))));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn metrics_csv_round_trips() {
        let rows = vec![row(0.0, 12), row(10.0, 17), row(20.0, 23)];
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,size,size_without_seed,errors,displaced,holes,error_pct,hole_pct\n"));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), rows);

        let mut agg = Vec::new();
        write_aggregate_csv(&aggregate(&[rows]).unwrap(), &mut agg).unwrap();
        assert_eq!(String::from_utf8(agg).unwrap().lines().count(), 4);
    }
}
