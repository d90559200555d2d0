//! Likelihood-free inference with rejection ABC followed by conditional
//! density estimation, plus the tools to compare estimators and rank summary
//! statistics without access to the likelihood.
//!
//! Numerical code is generic over [`num::Real`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`.

pub mod abc;
pub mod cde;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod models;
pub mod num;
pub mod oracle;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod summaries;

pub use abc::{split_train_validation, DistanceFn, RejectionSampler, SamplingTarget, Simulator, TrainingMetadata};
pub use cde::{ConditionalDensity, EstimatorSpec, EvalGrid};
pub use error::{Error, Result, Warning};
pub use loss::{compare_pair, select, surrogate_loss, true_ise, ComparisonResult, Decision, LossReport};
pub use models::{ModelKind, RawDataset};
pub use num::Real;
pub use regression::{ForestParams, RegressionMethod};
pub use summaries::{importance, select_by_threshold, Statistic, SummarySpec};

pub type TrainingSet = abc::TrainingSet<f64>;
pub type BenchmarkModel = models::BenchmarkModel<f64>;
pub type PosteriorOracle = oracle::PosteriorOracle<f64>;
pub type SummaryVector = summaries::SummaryVector<f64>;
pub type ImportanceScores = summaries::ImportanceScores<f64>;
pub type Matrix = linalg::Matrix<f64>;
