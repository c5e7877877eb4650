use thiserror::Error;

/// Errors produced by the kere library.
#[derive(Debug, Error)]
pub enum KereError {
    #[error("expectile level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("could not bracket the expectile root: {0}")]
    DegenerateDistribution(String),

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),

    #[error("gram bundle has not been eigendecomposed")]
    NotDecomposed,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dual constraint violated: sum of coefficients is {0}")]
    DualConstraint(f64),

    #[error("every cross-validation cell failed to converge")]
    AllCellsNonConvergent,

    #[error("{0}")]
    Unsupported(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl KereError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        KereError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used by the command-line error report.
    pub fn kind(&self) -> &'static str {
        match self {
            KereError::InvalidLevel(_) => "invalid_level",
            KereError::InvalidParameter { .. } => "invalid_parameter",
            KereError::DimensionMismatch { .. } => "dimension_mismatch",
            KereError::DegenerateDistribution(_) => "degenerate_distribution",
            KereError::Decomposition(_) => "decomposition",
            KereError::NotDecomposed => "not_decomposed",
            KereError::Singular(_) => "singular",
            KereError::NonFinite(_) => "non_finite",
            KereError::DualConstraint(_) => "dual_constraint",
            KereError::AllCellsNonConvergent => "all_cells_non_convergent",
            KereError::Unsupported(_) => "unsupported",
            KereError::Data(_) => "data",
            KereError::Io(_) => "io",
            KereError::Csv(_) => "csv",
            KereError::Json(_) => "json",
        }
    }
}

pub type Result<T, E = KereError> = std::result::Result<T, E>;
