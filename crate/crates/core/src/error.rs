use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate immersion at {at:?}: det G = {det:e} below threshold {threshold:e}")]
    DegenerateImmersion {
        at: Vec<f64>,
        det: f64,
        threshold: f64,
    },

    #[error("parameter point {at:?} lies outside the chart domain")]
    OutOfDomain { at: Vec<f64> },

    #[error("quadrature not converged: volume changed by {rel_change:e} (relative) under grid doubling")]
    NonConvergent { rel_change: f64 },

    #[error("direction is not a unit vector (norm {norm})")]
    NotUnit { norm: f64 },

    #[error("non-positive denominator {value:e} in the second bound family")]
    NonPositiveDenominator { value: f64 },

    #[error("direction is (nearly) normal everywhere: v^T A_T v = {value:e}")]
    TangentiallyDegenerate { value: f64 },

    #[error("bisection bracket does not change sign: phi(lo) = {phi_lo:e}, phi(hi) = {phi_hi:e}")]
    BisectionFailure { phi_lo: f64, phi_hi: f64 },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("mesh is not closed and connected: {0}")]
    MeshNotClosed(String),

    #[error("eigensolver stalled after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: face of degree {degree}, only triangles are supported")]
    NonTriangleFace {
        path: PathBuf,
        line: usize,
        degree: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable variant name, used in machine-readable error objects.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DegenerateImmersion { .. } => "DegenerateImmersion",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::NonConvergent { .. } => "NonConvergent",
            Error::NotUnit { .. } => "NotUnit",
            Error::NonPositiveDenominator { .. } => "NonPositiveDenominator",
            Error::TangentiallyDegenerate { .. } => "TangentiallyDegenerate",
            Error::BisectionFailure { .. } => "BisectionFailure",
            Error::BadParameter(_) => "BadParameter",
            Error::DegenerateTriangle { .. } => "DegenerateTriangle",
            Error::MeshNotClosed(_) => "MeshNotClosed",
            Error::SolverFailure { .. } => "SolverFailure",
            Error::Parse { .. } => "ParseError",
            Error::NonTriangleFace { .. } => "NonTriangleFace",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Io(_) => "IoError",
        }
    }
}
