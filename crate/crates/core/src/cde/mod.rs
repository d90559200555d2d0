//! Conditional density estimators of θ given standardized summaries.

pub mod adjust;
pub mod basis;
pub mod flexcode;
pub mod kde;
pub mod kernel;
pub mod nnkcde;
pub mod reference;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abc::TrainingSet;
use crate::error::{Error, Result, Warning};
use crate::num::{linspace, Real};

pub use adjust::{fit_adjusted_kde, regression_adjust, AdjustConfig, Adjustment};
pub use basis::FourierBasis;
pub use flexcode::{fit_flexcode, FlexCode, FlexCodeConfig};
pub use kde::{fit_abc_kde, AbcKde, KdeConfig};
pub use nnkcde::{fit_nnkcde, NnKcde, NnKcdeConfig};
pub use reference::{OracleEstimate, UniformEstimate, ZeroEstimate};

/// Chosen hyperparameters, keyed by name.
pub type Tuning = BTreeMap<String, f64>;

/// Number of points on the shared θ evaluation grid.
pub const GRID_POINTS: usize = 1024;

/// A fitted estimate of `f(θ | x)`. Covariates are in standardized units.
pub trait ConditionalDensity<T: Real>: Send + Sync {
    fn kind(&self) -> &str;

    fn tuning(&self) -> Tuning {
        Tuning::new()
    }

    fn warnings(&self) -> Vec<Warning> {
        Vec::new()
    }

    fn density(&self, theta: T, x: &[T]) -> T;

    /// `∫ f̂²(θ | x) dθ`.
    fn squared_integral(&self, x: &[T]) -> T;

    fn density_curve(&self, thetas: &[T], x: &[T]) -> Vec<T> {
        thetas.iter().map(|&t| self.density(t, x)).collect()
    }

    /// Per-point surrogate-loss term `∫ f̂²(θ | x) dθ - 2 f̂(θ' | x)`.
    fn loss_term(&self, theta: T, x: &[T]) -> T {
        self.squared_integral(x) - T::lit(2.0) * self.density(theta, x)
    }
}

impl<T: Real> std::fmt::Debug for dyn ConditionalDensity<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{:?}", self.kind(), self.tuning())
    }
}

/// Equispaced θ grid shared by all estimators in one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EvalGrid<T> {
    points: Vec<T>,
}

impl<T: Real> EvalGrid<T> {
    pub fn new(lower: T, upper: T, count: usize) -> Result<Self> {
        if !(lower < upper) || count < 2 {
            return Err(Error::Config(format!(
                "evaluation grid [{lower}, {upper}] with {count} points is empty"
            )));
        }
        Ok(Self {
            points: linspace(lower, upper, count),
        })
    }

    /// The hull of the padded θ range and `support`, with [`GRID_POINTS`] points.
    pub fn covering(thetas: &[T], support: Option<(T, T)>) -> Result<Self> {
        let (mut lo, mut hi) = basis::padded_range(thetas)?;
        if let Some((a, b)) = support {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Self::new(lo, hi, GRID_POINTS)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn range(&self) -> (T, T) {
        (self.points[0], self.points[self.points.len() - 1])
    }
}

/// Estimator and its tuning configuration, as declared in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    AbcKde(KdeConfig),
    NnKcde(NnKcdeConfig),
    #[serde(rename = "flexcode")]
    FlexCode(FlexCodeConfig),
    AdjustedKde(AdjustConfig),
}

impl EstimatorSpec {
    /// Label used in result tables.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::AbcKde(_) => "abc_kde".into(),
            EstimatorSpec::NnKcde(_) => "nn_kcde".into(),
            EstimatorSpec::FlexCode(c) => flexcode::label(&c.regressor).into(),
            EstimatorSpec::AdjustedKde(_) => "adjusted_kde".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::AbcKde(c) => c.validate(),
            EstimatorSpec::NnKcde(c) => c.validate(),
            EstimatorSpec::FlexCode(c) => c.validate(),
            EstimatorSpec::AdjustedKde(c) => c.kde.validate(),
        }
    }

    pub fn fit<T: Real>(
        &self,
        train: &TrainingSet<T>,
        validation: &TrainingSet<T>,
        seed: u64,
    ) -> Result<Box<dyn ConditionalDensity<T>>> {
        Ok(match self {
            EstimatorSpec::AbcKde(c) => Box::new(fit_abc_kde(train, c)?),
            EstimatorSpec::NnKcde(c) => Box::new(fit_nnkcde(train, validation, c)?),
            EstimatorSpec::FlexCode(c) => Box::new(fit_flexcode(train, validation, c, seed)?),
            EstimatorSpec::AdjustedKde(c) => Box::new(fit_adjusted_kde(train, c)?),
        })
    }
}
