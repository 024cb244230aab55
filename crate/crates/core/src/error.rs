use thiserror::Error;

/// Failures raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid would need {needed} points, cap is {cap}")]
    GridTooLarge { needed: usize, cap: usize },

    #[error("grid spacing {grid} does not match kernel spacing {kernel}")]
    SpacingMismatch { grid: f64, kernel: f64 },

    #[error("root finder could not bracket a solution: {0}")]
    NoBracket(String),

    #[error("field {h} is outside the branch range (bound {bound})")]
    BranchRange { h: f64, bound: f64 },

    #[error("domain half-length {ell} is not below the maximal length {ell_j}")]
    Infeasible { ell: f64, ell_j: f64 },

    #[error("metastable profile breaks down at length {breakdown}, requested {ell}")]
    MetastableBreakdown { ell: f64, breakdown: f64 },

    #[error("magnetization saturated: sup |m| = {sup}")]
    Saturation { sup: f64 },

    #[error("{what} did not converge after {iterations} iterations (last error {last})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("fixed-point map is not contracting: ratio >= 1 for {steps} consecutive steps")]
    ContractionFailure { steps: usize },

    #[error("mobility dropped to {value}, below the floor")]
    MobilityFloor { value: f64 },

    #[error("spectral gap closed: second eigenvalue estimate {lambda2}")]
    GapClosed { lambda2: f64 },

    #[error("singular banded system at column {0}")]
    Singular(usize),

    #[error("{0}")]
    Misaligned(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Parse(_) | Error::SpacingMismatch { .. } => 2,
            Error::Infeasible { .. } | Error::MetastableBreakdown { .. } => 3,
            _ => 4,
        }
    }

    /// Short stable tag, used where a failure has to fit in a table cell.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid",
            Error::GridTooLarge { .. } => "grid_too_large",
            Error::SpacingMismatch { .. } => "spacing",
            Error::NoBracket(_) => "no_bracket",
            Error::BranchRange { .. } => "branch_range",
            Error::Infeasible { .. } => "infeasible",
            Error::MetastableBreakdown { .. } => "metastable_breakdown",
            Error::Saturation { .. } => "saturation",
            Error::NonConvergence { .. } => "nonconvergence",
            Error::ContractionFailure { .. } => "contraction",
            Error::MobilityFloor { .. } => "mobility_floor",
            Error::GapClosed { .. } => "gap_closed",
            Error::Singular(_) => "singular",
            Error::Misaligned(_) => "misaligned",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
