use thiserror::Error;

/// Errors raised while evaluating special functions, building operators or
/// running identity checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("function requires the elliptic kind")]
    NonEllipticKind,

    #[error("series did not converge within {max_terms} terms")]
    SeriesNotConverged { max_terms: usize },

    #[error("{what} lies within {distance:.3e} of a pole (exclusion radius {radius:.1e})")]
    PoleProximity {
        what: String,
        distance: f64,
        radius: f64,
    },

    #[error("derivative order {0} is not supported (max 6)")]
    UnsupportedDerivOrder(u32),

    #[error("degenerate arguments: {0}")]
    DegenerateArguments(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator dimension {dim} exceeds size cap {cap}")]
    SizeCapExceeded { dim: usize, cap: usize },

    #[error("argument `{0}` must be nonzero")]
    ZeroArgument(&'static str),

    #[error("contour of radius {radius:.3e} passes within reach of a pole at distance {pole_distance:.3e}")]
    ContourHitsPole { radius: f64, pole_distance: f64 },

    #[error("contour quadrature not converged: residual {residual:.3e}")]
    QuadratureNotConverged { residual: f64 },

    #[error("classical expansion failed: {0}")]
    ExpansionFailed(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("work estimate {estimate:.3e} exceeds budget {budget:.3e}: {reason}")]
    BudgetExceeded {
        estimate: f64,
        budget: f64,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
