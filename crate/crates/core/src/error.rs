use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid resolution m = {m} is too coarse (need m >= {min})")]
    Resolution { m: usize, min: usize },

    #[error("grid mismatch: {left} vs {right} nodes")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid obstacle: {0}")]
    Obstacle(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate initial datum: max |u0'| = 0, an explicit horizon T is required")]
    DegenerateDatum,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("derivative cap violated at step {step}: max |u'| = {slope} > {cap}")]
    CapViolation { step: usize, slope: f64, cap: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Resolution { .. } => "resolution",
            Error::GridMismatch { .. } => "grid_mismatch",
            Error::Obstacle(_) => "obstacle",
            Error::Infeasible(_) => "infeasible",
            Error::DegenerateDatum => "degenerate_datum",
            Error::NonConvergence { .. } => "non_convergence",
            Error::CapViolation { .. } => "cap_violation",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
