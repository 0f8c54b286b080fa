use thiserror::Error;

#[derive(Debug, Error)]
pub enum FppError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("points {0} and {1} are not nearest neighbors")]
    NotAdjacent(String, String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("search budget exceeded: more than {cap} vertices settled")]
    BudgetExceeded { cap: usize },

    #[error("sampler mismatch: {0}")]
    SamplerMismatch(String),

    #[error("quadrature failed to reach tolerance {tolerance:e} (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure {
        tolerance: f64,
        estimate: f64,
        error: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FppError {
    /// Stable short name used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            FppError::Domain(_) => "DomainError",
            FppError::NotAdjacent(..) => "NotAdjacent",
            FppError::UnsupportedModel(_) => "UnsupportedModel",
            FppError::BudgetExceeded { .. } => "BudgetExceeded",
            FppError::SamplerMismatch(_) => "SamplerMismatch",
            FppError::QuadratureFailure { .. } => "QuadratureFailure",
            FppError::Config(_) => "ConfigError",
            FppError::Io(_) => "IoError",
            FppError::Json(_) => "JsonError",
            FppError::Csv(_) => "CsvError",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FppError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, FppError>;
