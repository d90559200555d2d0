//! Local-linear regression adjustment of accepted θ values, followed by a
//! weighted KDE of the adjusted sample.

use serde::{Deserialize, Serialize};

use crate::abc::TrainingSet;
use crate::error::{Error, Result, Warning};
use crate::linalg::{solve, Matrix};
use crate::num::Real;

use super::kde::{AbcKde, KdeConfig};
use super::{ConditionalDensity, Tuning};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdjustConfig {
    /// Skip the scale model and shift residuals only.
    pub homoscedastic: bool,
    pub kde: KdeConfig,
}

/// Adjusted sample `θ̃_i = m(x_o) + (θ_i - m(x_i)) σ(x_o) / σ(x_i)` with its kernel weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Adjustment<T> {
    pub thetas: Vec<T>,
    /// Epanechnikov weights in the ABC distance.
    pub weights: Vec<T>,
    /// Fitted conditional mean at the observed summaries.
    pub mean_at_observed: T,
    pub warnings: Vec<Warning>,
}

impl<T: Real> Adjustment<T> {
    /// Training set with θ replaced by the adjusted values.
    pub fn apply_to(&self, train: &TrainingSet<T>) -> TrainingSet<T> {
        let mut out = train.clone();
        out.thetas = self.thetas.clone();
        out.warnings.extend(self.warnings.iter().cloned());
        out
    }

    /// Weighted mean of the adjusted sample.
    pub fn weighted_mean(&self) -> T {
        let (num, den) = self
            .thetas
            .iter()
            .zip(&self.weights)
            .fold((T::zero(), T::zero()), |(n, d), (&t, &w)| (n + w * t, d + w));
        num / den
    }
}

/// Weighted least squares of `y` on `[1, x_i - x_o]`; returns the coefficients
/// or `None` when the design is rank deficient.
fn local_linear<T: Real>(z: &Matrix<T>, weights: &[T], y: &[T]) -> Option<Vec<T>> {
    let p = z.cols();
    let positive = weights.iter().filter(|&&w| w > T::zero()).count();
    if positive < p {
        return None;
    }
    let mut a = Matrix::zeros(p, p);
    let mut b = vec![T::zero(); p];
    for ((row, &w), &yi) in z.iter_rows().zip(weights).zip(y) {
        if !(w > T::zero()) {
            continue;
        }
        for r in 0..p {
            let wr = w * row[r];
            b[r] = b[r] + wr * yi;
            for c in r..p {
                a.set(r, c, a.get(r, c) + wr * row[c]);
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            a.set(r, c, a.get(c, r));
        }
    }
    solve(&a, &b, T::lit(1e-10))
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Beaumont-style adjustment around the observed summaries of `train`.
pub fn regression_adjust<T: Real>(train: &TrainingSet<T>, cfg: &AdjustConfig) -> Result<Adjustment<T>> {
    let n = train.len();
    if n < 2 {
        return Err(Error::Config("regression adjustment needs at least 2 pairs".into()));
    }
    let bandwidth = train.distances.iter().fold(T::zero(), |m, &d| m.max(d));
    let weights: Vec<T> = if bandwidth > T::zero() && bandwidth.is_finite() {
        train
            .distances
            .iter()
            .map(|&d| {
                let r = d / bandwidth;
                (T::one() - r * r).max(T::zero())
            })
            .collect()
    } else {
        vec![T::one(); n]
    };
    let d = train.dim();
    let mut z = Matrix::zeros(n, d + 1);
    for (i, row) in train.covariates.iter_rows().enumerate() {
        z.set(i, 0, T::one());
        for j in 0..d {
            z.set(i, j + 1, row[j] - train.observed[j]);
        }
    }
    let Some(coef) = local_linear(&z, &weights, &train.thetas) else {
        log::warn!("local-linear design is rank deficient; using a mean-only adjustment");
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        let mean = dot(&weights, &train.thetas) / total;
        return Ok(Adjustment {
            thetas: train.thetas.clone(),
            weights,
            mean_at_observed: mean,
            warnings: vec![Warning::RankDeficientAdjustment],
        });
    };
    let fitted: Vec<T> = z.iter_rows().map(|r| dot(r, &coef)).collect();
    let residuals: Vec<T> = train.thetas.iter().zip(&fitted).map(|(&t, &m)| t - m).collect();
    let m_o = coef[0];
    let abs_res: Vec<T> = residuals.iter().map(|r| r.abs()).collect();
    let total_w = weights.iter().fold(T::zero(), |a, &w| a + w);
    let mean_abs = dot(&weights, &abs_res) / total_w;

    let ratios: Vec<T> = if cfg.homoscedastic || !(mean_abs > T::zero()) {
        vec![T::one(); n]
    } else {
        match local_linear(&z, &weights, &abs_res) {
            Some(sc) => {
                let floor = mean_abs * T::lit(1e-3);
                let s_o = sc[0].max(floor);
                z.iter_rows().map(|r| s_o / dot(r, &sc).max(floor)).collect()
            }
            None => vec![T::one(); n],
        }
    };
    let thetas = residuals.iter().zip(&ratios).map(|(&r, &q)| m_o + r * q).collect();
    Ok(Adjustment {
        thetas,
        weights,
        mean_at_observed: m_o,
        warnings: Vec::new(),
    })
}

/// KDE of the regression-adjusted sample, weighted by the kernel weights.
#[derive(Debug, Clone)]
pub struct AdjustedKde<T> {
    kde: AbcKde<T>,
    warnings: Vec<Warning>,
}

impl<T: Real> AdjustedKde<T> {
    pub fn bandwidth(&self) -> T {
        self.kde.bandwidth()
    }
}

pub fn fit_adjusted_kde<T: Real>(train: &TrainingSet<T>, cfg: &AdjustConfig) -> Result<AdjustedKde<T>> {
    if train.len() < 10 {
        return Err(Error::Config(format!(
            "adjusted KDE needs at least 10 accepted pairs, got {}",
            train.len()
        )));
    }
    let adj = regression_adjust(train, cfg)?;
    let kde = AbcKde::fit_weighted(&adj.thetas, Some(&adj.weights), &cfg.kde)?.relabel("adjusted_kde");
    Ok(AdjustedKde {
        kde,
        warnings: adj.warnings,
    })
}

impl<T: Real> ConditionalDensity<T> for AdjustedKde<T> {
    fn kind(&self) -> &str {
        self.kde.kind()
    }

    fn tuning(&self) -> Tuning {
        self.kde.tuning()
    }

    fn warnings(&self) -> Vec<Warning> {
        self.warnings.clone()
    }

    fn density(&self, theta: T, x: &[T]) -> T {
        self.kde.density(theta, x)
    }

    fn squared_integral(&self, x: &[T]) -> T {
        self.kde.squared_integral(x)
    }
}
