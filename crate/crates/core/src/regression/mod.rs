//! Multi-output regression of basis-function values on summary statistics.

pub mod forest;
pub mod kdtree;
pub mod knn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::num::Real;

pub use forest::{ForestParams, RandomForest};
pub use kdtree::{KdTree, Neighbor};
pub use knn::KnnRegressor;

/// A fitted regression from covariates to one or more responses.
pub trait Regressor<T: Real>: Send + Sync {
    fn n_outputs(&self) -> usize;

    /// Writes the `n_outputs()` predictions at `x` into `out`.
    fn predict_into(&self, x: &[T], out: &mut [T]);

    fn predict(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_outputs()];
        self.predict_into(x, &mut out);
        out
    }

    /// Per-output covariate importances (`n_outputs × n_covariates`), if the
    /// method provides them.
    fn importances(&self) -> Option<&Matrix<T>> {
        None
    }
}

/// Regression method and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressionMethod {
    NearestNeighbors {
        /// Candidate neighbor counts; FlexCode tunes over them by surrogate loss.
        k_grid: Vec<usize>,
    },
    TreeEnsemble(ForestParams),
}

impl RegressionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RegressionMethod::NearestNeighbors { .. } => "nearest_neighbors",
            RegressionMethod::TreeEnsemble(_) => "tree_ensemble",
        }
    }

    pub fn provides_importances(&self) -> bool {
        matches!(self, RegressionMethod::TreeEnsemble(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressionMethod::NearestNeighbors { k_grid } => {
                if k_grid.is_empty() || k_grid.contains(&0) {
                    return Err(Error::Config(
                        "nearest-neighbor k_grid must be non-empty with positive entries".into(),
                    ));
                }
                Ok(())
            }
            RegressionMethod::TreeEnsemble(p) => p.validate(),
        }
    }

    /// Fits the regression of each column of `y` on `x`. For nearest
    /// neighbors the largest grid value (capped at the sample size) is used.
    pub fn fit<T: Real>(&self, x: &Matrix<T>, y: &Matrix<T>, seed: u64) -> Result<Box<dyn Regressor<T>>> {
        self.validate()?;
        check_shapes(x, y)?;
        match self {
            RegressionMethod::NearestNeighbors { k_grid } => {
                let k = k_grid.iter().copied().max().unwrap_or(1).min(x.rows());
                Ok(Box::new(KnnRegressor::fit(x.clone(), y.clone(), k)?))
            }
            RegressionMethod::TreeEnsemble(p) => Ok(Box::new(RandomForest::fit(x, y, p, seed)?)),
        }
    }
}

pub(crate) fn check_shapes<T: Real>(x: &Matrix<T>, y: &Matrix<T>) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::Config(format!(
            "{} covariate rows but {} response rows",
            x.rows(),
            y.rows()
        )));
    }
    if x.rows() == 0 || x.cols() == 0 || y.cols() == 0 {
        return Err(Error::Config("regression needs a non-empty design".into()));
    }
    Ok(())
}
