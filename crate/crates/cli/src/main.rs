use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tbsa::analysis::{self, AnalysisParams};
use tbsa::glue::fit_magnet_params;
use tbsa::harness::{self, ExperimentConfig};
use tbsa::stability;

#[derive(Parser)]
#[command(name = "tbsa", version, about = "Physics simulator and analysis toolkit for macroscale tile self-assembly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Simulate {
        config: PathBuf,
        /// Overrides the config's rng seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeds S..S+N and aggregate, or a calibration grid when
    /// `--grid-force`/`--grid-frequency` are given.
    Batch {
        config: PathBuf,
        #[arg(long, default_value_t = 36)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Drive force magnitudes (N) to sweep.
        #[arg(long, value_delimiter = ',')]
        grid_force: Vec<f64>,
        /// Excitation frequencies (Hz) to sweep.
        #[arg(long, value_delimiter = ',')]
        grid_frequency: Vec<f64>,
    },
    /// Re-analyse snapshot streams into metrics CSV files next to them.
    Analyze {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
        /// Also write the aggregate CSV and charts to this directory.
        #[arg(long)]
        aggregate: Option<PathBuf>,
        #[arg(long, default_value_t = AnalysisParams::default().gap_tolerance)]
        gap_tolerance: f64,
        #[arg(long, default_value_t = AnalysisParams::default().angle_tolerance_deg)]
        angle_tolerance: f64,
    },
    /// Critical seed size for a glue force, tile mass and acceleration.
    Stability {
        /// Glue force F_g (N).
        #[arg(long)]
        fg: f64,
        /// Tile mass (kg).
        #[arg(long)]
        mt: f64,
        /// Acceleration (m/s²).
        #[arg(long)]
        accel: f64,
        /// Print a CSV table over these glue forces and accelerations as well.
        #[arg(long)]
        sweep: bool,
        #[arg(long, value_delimiter = ',')]
        sweep_fg: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        sweep_accel: Vec<f64>,
    },
    /// Fit alpha and beta of the magnet law to a `distance_cm,force_n` CSV.
    FitMagnet { csv: PathBuf },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn load(config: &Path, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(out) = out {
        c.output_dir = out;
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut c = load(&config, out)?;
            if let Some(s) = seed {
                c.rng_seed = s;
            }
            let r = harness::run_experiment(&c)?;
            if let Some(last) = r.metrics.last() {
                println!(
                    "run {} t={} size={} error_pct={:.2} hole_pct={:.2} -> {}",
                    c.rng_seed,
                    last.time,
                    last.size,
                    last.error_pct,
                    last.hole_pct,
                    r.dir.display()
                );
            }
            Ok(true)
        }
        Command::Batch {
            config,
            runs,
            seed,
            jobs,
            out,
            grid_force,
            grid_frequency,
        } => {
            let c = load(&config, out)?;
            std::fs::create_dir_all(&c.output_dir)?;
            if !grid_force.is_empty() || !grid_frequency.is_empty() {
                let forces = if grid_force.is_empty() { vec![c.drive.force] } else { grid_force };
                let freqs = if grid_frequency.is_empty() { vec![c.drive.frequency] } else { grid_frequency };
                let points = harness::calibrate(&c, &forces, &freqs, runs, seed, jobs)?;
                println!("force,frequency,runs,failures,final_size_mean,final_size_std");
                for p in &points {
                    println!(
                        "{},{},{},{},{:.2},{:.2}",
                        p.force, p.frequency, p.runs, p.failures, p.final_size_mean, p.final_size_std
                    );
                }
                return Ok(points.iter().all(|p| p.failures == 0));
            }
            let b = harness::run_batch(&c, runs, seed, jobs)?;
            for (s, e) in &b.failures {
                eprintln!("run {s} failed: {e}");
            }
            if let Some(last) = b.aggregate.last() {
                println!(
                    "{} runs, t={}: size {:.2} ± {:.2}, error_pct {:.2} ± {:.2}, hole_pct {:.2} ± {:.2}",
                    last.runs,
                    last.time,
                    last.size.mean,
                    last.size.std,
                    last.error_pct.mean,
                    last.error_pct.std,
                    last.hole_pct.mean,
                    last.hole_pct.std
                );
            }
            println!("outputs in {}", c.output_dir.display());
            Ok(b.failures.is_empty())
        }
        Command::Analyze {
            snapshots,
            aggregate,
            gap_tolerance,
            angle_tolerance,
        } => {
            let params = AnalysisParams {
                gap_tolerance,
                angle_tolerance_deg: angle_tolerance,
            };
            params.validate()?;
            let mut all = Vec::new();
            for path in &snapshots {
                let rows = harness::analyze_stream(path, &params).with_context(|| format!("analysing {}", path.display()))?;
                let out = path.with_file_name("metrics.csv");
                analysis::write_metrics_csv(&rows, std::fs::File::create(&out)?)?;
                println!("{} -> {} ({} snapshots)", path.display(), out.display(), rows.len());
                all.push(rows);
            }
            if let Some(dir) = aggregate {
                std::fs::create_dir_all(&dir)?;
                let agg = analysis::aggregate(&all)?;
                analysis::write_aggregate_csv(&agg, std::fs::File::create(dir.join("aggregate.csv"))?)?;
                harness::write_charts(&dir, &[("batch".to_string(), agg.as_slice())])?;
            }
            Ok(true)
        }
        Command::Stability {
            fg,
            mt,
            accel,
            sweep,
            sweep_fg,
            sweep_accel,
        } => {
            let n = stability::critical_seed_size(fg, mt, accel)?;
            let balance = stability::glue_balance_size(fg, mt, accel)?;
            println!("critical_seed_size={n}");
            println!("glue_balance_size={balance}");
            if sweep {
                let fgs = if sweep_fg.is_empty() { vec![fg * 0.5, fg, fg * 2.0] } else { sweep_fg };
                let accels = if sweep_accel.is_empty() { vec![accel * 0.5, accel, accel * 2.0] } else { sweep_accel };
                let rows = stability::sweep(&fgs, &accels, mt)?;
                stability::write_sweep_csv(&rows, std::io::stdout().lock())?;
            }
            Ok(true)
        }
        Command::FitMagnet { csv } => {
            let mut reader = ::csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(&csv)
                .with_context(|| format!("opening {}", csv.display()))?;
            let mut samples = Vec::new();
            for rec in reader.records() {
                let rec = rec?;
                if rec.len() < 2 {
                    bail!("expected two columns: distance_cm,force_n");
                }
                samples.push((rec[0].trim().parse::<f64>()?, rec[1].trim().parse::<f64>()?));
            }
            let fit = fit_magnet_params(&samples)?;
            println!("alpha={}", fit.alpha);
            println!("beta={}", fit.beta);
            println!("residual={}", fit.residual);
            Ok(true)
        }
        Command::DefaultConfig => {
            print!("{}", ExperimentConfig::default().to_toml());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
