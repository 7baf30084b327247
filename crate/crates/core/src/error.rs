use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least one interior node")]
    EmptyGrid,

    #[error("initial data is not finite at node {index} (x = {x}): {value}")]
    NonFiniteSample { index: usize, x: f64, value: f64 },

    #[error("state has {found} entries, grid has {expected} interior nodes")]
    LengthMismatch { expected: usize, found: usize },

    #[error("state belongs to a grid with N = {found}, expected N = {expected}")]
    GridMismatch { expected: usize, found: usize },

    #[error("weight exponent alpha = {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("c_alpha requires alpha in [0, 1), got {0}")]
    CAlphaUndefined(f64),

    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("final time {final_time} is not a whole number of steps of size {dt}")]
    IncommensurateTimeStep { final_time: f64, dt: f64 },

    #[error("singular pivot {pivot:e} at row {row} (M-matrix structure lost)")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("dense oracle limited to N <= {max}, got N = {n}")]
    DenseTooLarge { n: usize, max: usize },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },

    #[error("grid with N = {coarse} is not nested in reference grid with N = {fine}")]
    NonNested { coarse: usize, fine: usize },

    #[error("reference rejected: euler/bdf2 final states differ by {discrepancy:e} in the D,h-norm (tolerance {tolerance:e})")]
    ReferenceRejected { discrepancy: f64, tolerance: f64 },

    #[error("malformed reference cache {path}: {reason}")]
    CacheFormat { path: PathBuf, reason: String },

    #[error("reference cache {path} failed its checksum (stored {stored:016x}, computed {computed:016x})")]
    CacheChecksum { path: PathBuf, stored: u64, computed: u64 },

    #[error("{path} exists; pass force to overwrite")]
    WouldOverwrite { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
