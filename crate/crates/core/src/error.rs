use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("could not place {placed}/{requested} free tiles within {attempts} attempts")]
    PlacementOverflow {
        placed: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("numerical divergence at step {step}: tile {tile} reached speed {speed} m/s")]
    NumericalDivergence { step: u64, tile: usize, speed: f64 },

    #[error("least-squares fit did not converge: {0}")]
    NonConvergence(String),

    #[error("tiles {first} and {second} snap to the same lattice cell ({x}, {y})")]
    LatticeSnapFailure {
        first: usize,
        second: usize,
        x: i32,
        y: i32,
    },

    #[error("time grids differ between metric series: {0}")]
    MismatchedGrid(String),

    #[error("malformed snapshot stream at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("run {run} failed: {source}")]
    Run {
        run: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
