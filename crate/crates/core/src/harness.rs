//! Experiment configuration, deterministic runs and batches.
//!
//! A run builds the seed and the scattered free tiles, then loops
//! drive → glue → physics at a fixed step and records a snapshot every
//! snapshot period, including `t = 0` and `t = duration`. Given the config and
//! its rng seed every byte a run writes is reproducible.
//!
//! Files of a run `<dir>/run-<seed>`:
//!
//! * `snapshots.txt`: the snapshot stream;
//! * `metrics.csv`: one [`MetricsRow`] per snapshot;
//! * `manifest.json`: software version, config digest and effective config.
//!
//! A batch adds `aggregate.csv`, `failures.txt` and one SVG chart per metric.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, aggregate, AggregateRow, AnalysisParams, MetricsRow};
use crate::drive::DriveSpec;
use crate::glue::{accumulate_glue_forces, MagnetParams};
use crate::model::{build_chessboard_tileset, build_cross_seed, scatter_free_tiles, ReactorSpec, SeedSpec, Tileset};
use crate::physics::{PhysicsParams, World};
use crate::snapshot::{SnapshotWriter, StreamHeader};
use crate::svg::{line_chart, Series};
use crate::{rng, Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TILESET_NAME: &str = "chessboard";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// s
    pub duration: f64,
    /// s
    pub snapshot_period: f64,
    pub free_tiles: usize,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    pub reactor: ReactorSpec,
    pub seed: SeedSpec,
    pub drive: DriveSpec,
    pub physics: PhysicsParams,
    pub magnets: MagnetParams,
    pub analysis: AnalysisParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            duration: 3600.0,
            snapshot_period: 10.0,
            free_tiles: 550,
            rng_seed: 0,
            output_dir: PathBuf::from("out"),
            reactor: ReactorSpec::default(),
            seed: SeedSpec::default(),
            drive: DriveSpec::default(),
            physics: PhysicsParams::default(),
            magnets: MagnetParams::default(),
            analysis: AnalysisParams::default(),
        }
    }
}

/// `x` as a whole number of `unit`s, if it is one.
fn whole_multiple(x: f64, unit: f64) -> Option<u64> {
    let k = (x / unit).round();
    ((x / unit - k).abs() < 1e-6 && k >= 1.0).then_some(k as u64)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.reactor.validate()?;
        self.seed.validate()?;
        self.drive.validate()?;
        self.physics.validate()?;
        self.magnets.validate()?;
        self.analysis.validate()?;
        self.schedule().map(|_| ())
    }

    /// `(steps per snapshot, snapshot count after t = 0)`.
    pub fn schedule(&self) -> Result<(u64, u64)> {
        if !(self.duration > 0.0 && self.snapshot_period > 0.0) {
            return Err(Error::Config("duration and snapshot period must be positive".into()));
        }
        let per = whole_multiple(self.snapshot_period, self.physics.dt).ok_or_else(|| {
            Error::Config(format!(
                "snapshot period {} is not a whole number of steps of {}",
                self.snapshot_period, self.physics.dt
            ))
        })?;
        let count = whole_multiple(self.duration, self.snapshot_period).ok_or_else(|| {
            Error::Config(format!(
                "snapshot period {} does not divide duration {}",
                self.snapshot_period, self.duration
            ))
        })?;
        Ok((per, count))
    }

    /// SHA-256 of the config as TOML, ignoring where outputs go.
    pub fn digest(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn tileset(&self) -> Tileset {
        build_chessboard_tileset()
    }

    /// Seed plus scattered free tiles, ready to run.
    pub fn build_world(&self) -> Result<World> {
        let tileset = self.tileset();
        let w = self.physics.tile_width;
        let mut tiles: Vec<_> = build_cross_seed(&self.seed, &tileset, w)?.into_iter().map(|(_, t)| t).collect();
        let mut rng = rng::seeded(self.rng_seed);
        let free = scatter_free_tiles(self.free_tiles, &self.reactor, w, &tiles, &tileset, &mut rng)?;
        tiles.extend(free);
        World::new(self.reactor, self.physics, self.magnets, self.drive, tileset, tiles)
    }
}

/// One simulation step: drive and glue wrenches, then physics.
pub fn step_world(world: &mut World) -> Result<()> {
    let mut wrenches = world.drive.wrenches(world, world.clock());
    for (w, g) in wrenches.iter_mut().zip(accumulate_glue_forces(world)) {
        *w += g;
    }
    world.step(&wrenches)
}

/// Runs `config` in memory, calling `observe(time, world)` at every
/// snapshot instant.
pub fn simulate<F>(config: &ExperimentConfig, mut observe: F) -> Result<()>
where
    F: FnMut(f64, &World) -> Result<()>,
{
    let wrap = |e: Error| Error::Run {
        run: config.rng_seed,
        source: Box::new(e),
    };
    config.validate()?;
    let (per, count) = config.schedule()?;
    let mut world = config.build_world().map_err(wrap)?;
    observe(0.0, &world)?;
    for k in 1..=count {
        for _ in 0..per {
            step_world(&mut world).map_err(wrap)?;
        }
        observe(k as f64 * config.snapshot_period, &world)?;
    }
    Ok(())
}

/// Metrics of `config` without writing anything.
pub fn run_metrics(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let tileset = config.tileset();
    let mut rows = Vec::new();
    simulate(config, |t, world| {
        rows.push(analysis::analyze_tiles(t, &world.tiles, &tileset, config.physics.tile_width, &config.analysis)?);
        Ok(())
    })?;
    Ok(rows)
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    run: u64,
    config_digest: String,
    tileset: &'static str,
    config: &'a ExperimentConfig,
}

pub fn run_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("run-{seed}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub metrics: Vec<MetricsRow>,
}

/// Runs one experiment, writing stream, metrics and manifest under
/// [`run_dir`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let dir = run_dir(&config.output_dir, config.rng_seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let digest = config.digest();

    let manifest = Manifest {
        software: "tbsa",
        version: VERSION,
        run: config.rng_seed,
        config_digest: digest.clone(),
        tileset: TILESET_NAME,
        config,
    };
    let path = dir.join("manifest.json");
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &manifest).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(&path, e))?;

    let stream_path = dir.join("snapshots.txt");
    let tiles = config.seed.cells()?.len() + config.free_tiles;
    let header = StreamHeader {
        run: config.rng_seed,
        digest,
        tileset: TILESET_NAME.into(),
        tile_width: config.physics.tile_width,
        tiles,
    };
    let io = |e| Error::io(&stream_path, e);
    let mut writer = SnapshotWriter::new(create(&stream_path)?, header).map_err(io)?;
    let tileset = config.tileset();
    let mut metrics = Vec::new();
    simulate(config, |t, world| {
        writer.write(world.steps(), t, &world.tiles).map_err(io)?;
        metrics.push(analysis::analyze_tiles(t, &world.tiles, &tileset, config.physics.tile_width, &config.analysis)?);
        Ok(())
    })?;
    writer.finish().map_err(io)?;

    let path = dir.join("metrics.csv");
    analysis::write_metrics_csv(&metrics, create(&path)?)?;
    Ok(RunOutput { dir, metrics })
}

/// Re-analyses a stored snapshot stream.
pub fn analyze_stream(path: &Path, params: &AnalysisParams) -> Result<Vec<MetricsRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (header, snapshots) = crate::snapshot::read_stream(std::io::BufReader::new(file))?;
    if header.tileset != TILESET_NAME {
        return Err(Error::Config(format!("unknown tileset `{}`", header.tileset)));
    }
    let tileset = build_chessboard_tileset();
    snapshots
        .iter()
        .map(|s| analysis::analyze_snapshot(s, &tileset, header.tile_width, params))
        .collect()
}

#[derive(Debug)]
pub struct BatchOutput {
    /// Completed runs in seed order.
    pub runs: Vec<(u64, Vec<MetricsRow>)>,
    pub failures: Vec<(u64, Error)>,
    pub aggregate: Vec<AggregateRow>,
}

impl BatchOutput {
    pub fn final_rows(&self) -> Vec<MetricsRow> {
        self.runs.iter().filter_map(|(_, m)| m.last().copied()).collect()
    }
}

/// Runs seeds `base_seed .. base_seed + runs` on `jobs` threads. Outputs do
/// not depend on `jobs`.
pub fn run_batch(config: &ExperimentConfig, runs: u64, base_seed: u64, jobs: usize) -> Result<BatchOutput> {
    if runs == 0 {
        return Err(Error::InvalidParameter("a batch needs at least one run".into()));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let results: Vec<(u64, Result<RunOutput>)> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|k| {
                let seed = base_seed + k;
                let run = ExperimentConfig {
                    rng_seed: seed,
                    ..config.clone()
                };
                (seed, run_experiment(&run))
            })
            .collect()
    });

    let mut done = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(out) => done.push((seed, out.metrics)),
            Err(e) => failures.push((seed, e)),
        }
    }
    let dir = &config.output_dir;
    let path = dir.join("failures.txt");
    let mut out = create(&path)?;
    for (seed, e) in &failures {
        writeln!(out, "run {seed}: {e}").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let series: Vec<Vec<MetricsRow>> = done.iter().map(|(_, m)| m.clone()).collect();
    let agg = if series.is_empty() { Vec::new() } else { aggregate(&series)? };
    let path = dir.join("aggregate.csv");
    analysis::write_aggregate_csv(&agg, create(&path)?)?;
    write_charts(dir, &[(mode_name(config), agg.as_slice())])?;
    Ok(BatchOutput {
        runs: done,
        failures,
        aggregate: agg,
    })
}

fn mode_name(config: &ExperimentConfig) -> String {
    format!("{:?}", config.drive.mode).to_lowercase()
}

/// One chart per metric, one line (with ±σ band) per labelled aggregate.
pub fn write_charts(dir: &Path, aggregates: &[(String, &[AggregateRow])]) -> Result<()> {
    type Pick = fn(&AggregateRow) -> analysis::Stat;
    let metrics: [(&str, &str, Pick); 3] = [
        ("size", "assembly size (tiles)", |r| r.size),
        ("error_pct", "errors (%)", |r| r.error_pct),
        ("hole_pct", "holes (%)", |r| r.hole_pct),
    ];
    for (file, label, pick) in metrics {
        let series: Vec<Series> = aggregates
            .iter()
            .map(|(name, rows)| Series {
                name: name.clone(),
                points: rows.iter().map(|r| (r.time, pick(r).mean, pick(r).std)).collect(),
            })
            .collect();
        let path = dir.join(format!("{file}.svg"));
        fs::write(&path, line_chart(label, "time (s)", label, &series)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub force: f64,
    pub frequency: f64,
    pub runs: usize,
    pub failures: usize,
    pub final_size_mean: f64,
    pub final_size_std: f64,
    pub final_error_pct_mean: f64,
    pub final_hole_pct_mean: f64,
}

/// Batch over every `(force, frequency)` pair; each point writes into its
/// own subdirectory and a summary lands in `calibration.csv`.
pub fn calibrate(
    config: &ExperimentConfig,
    forces: &[f64],
    frequencies: &[f64],
    runs: u64,
    base_seed: u64,
    jobs: usize,
) -> Result<Vec<GridPoint>> {
    let mut points = Vec::new();
    for &force in forces {
        for &frequency in frequencies {
            let mut point = config.clone();
            point.drive.force = force;
            point.drive.frequency = frequency;
            point.output_dir = config.output_dir.join(format!("force-{force}-freq-{frequency}"));
            fs::create_dir_all(&point.output_dir).map_err(|e| Error::io(&point.output_dir, e))?;
            let out = run_batch(&point, runs, base_seed, jobs)?;
            let last = out.aggregate.last().copied().unwrap_or(AggregateRow {
                time: 0.0,
                runs: 0,
                size: Default::default(),
                size_without_seed: Default::default(),
                error_pct: Default::default(),
                hole_pct: Default::default(),
            });
            points.push(GridPoint {
                force,
                frequency,
                runs: out.runs.len(),
                failures: out.failures.len(),
                final_size_mean: last.size.mean,
                final_size_std: last.size.std,
                final_error_pct_mean: last.error_pct.mean,
                final_hole_pct_mean: last.hole_pct.mean,
            });
        }
    }
    let path = config.output_dir.join("calibration.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    for p in &points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(points)
}
