use std::path::PathBuf;

/// Errors produced by the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar argument fell outside its admissible range.
    #[error("domain error: {name}={value} is outside {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A model or run configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The series cannot support the requested embedding or forward step.
    #[error("series too short: need more than {required} samples, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },

    #[error("degenerate lag angle beta={0}: the embedded ellipse collapses to a segment")]
    DegenerateBeta(f64),

    #[error("neighbor count K={k} must be smaller than the number of points N={n}")]
    NeighborCount { k: usize, n: usize },

    /// The K-th neighbor of a point sits on top of it, so the bandwidth vanishes.
    #[error("zero bandwidth at point {index}: K-th neighbor distance {distance:e} is below {threshold:e}")]
    ZeroBandwidth {
        index: usize,
        distance: f64,
        threshold: f64,
    },

    #[error("kernel row {0} sums to zero (isolated point)")]
    ZeroRow(usize),

    #[error("eigensolver did not converge (max residual {max_residual:e})")]
    EigenNonConvergence { max_residual: f64, residuals: Vec<f64> },

    #[error("eigenvalue {re}{im:+}i is real: period undefined")]
    RealEigenvalue { re: f64, im: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("mask selects no samples on one side (inside={inside}, outside={outside})")]
    EmptyMask { inside: usize, outside: usize },

    #[error("mode series has zero variance")]
    ZeroVariance,

    #[error("mode index {index} is outside 1..={available}")]
    UnknownMode { index: usize, available: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate time {0} in record")]
    DuplicateTime(f64),

    #[error("interpolation window [{start}, {end}] exceeds record support [{min}, {max}]")]
    Extrapolation {
        start: f64,
        end: f64,
        min: f64,
        max: f64,
    },

    #[error("grid inconsistency: {0}")]
    GridInconsistency(String),

    #[error("climatology window {start}..{end} does not fit a series of {len} samples with cycle {cycle}")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        len: usize,
        cycle: usize,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical stages (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroBandwidth { .. }
                | Error::ZeroRow(_)
                | Error::EigenNonConvergence { .. }
                | Error::ZeroVariance
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
