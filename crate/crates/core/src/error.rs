use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("proposal budget of {cap} exhausted with {accepted} of {target} points accepted")]
    BudgetExhausted { cap: usize, accepted: usize, target: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("regression method `{0}` does not expose covariate importances")]
    MissingImportances(String),

    #[error("estimator failure: {0}")]
    Estimator(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Non-fatal conditions recorded alongside results.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum Warning {
    /// A summary coordinate had zero variance and was centered but not scaled.
    ZeroVariance { coordinate: usize, name: String },
    /// Validation set smaller than the recommended minimum.
    SmallValidation { size: usize },
    /// Series cutoff large relative to the training size.
    CutoffExceedsSample { cutoff: usize, sample: usize },
    /// Local-linear design was rank deficient; a mean-only shift was used.
    RankDeficientAdjustment,
}
