//! Loss functions: the true integrated squared error against a known
//! posterior and the surrogate loss estimated from held-out pairs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::abc::TrainingSet;
use crate::cde::{ConditionalDensity, EvalGrid};
use crate::error::{Error, Result, Warning};
use crate::num::{pairwise_sum, sample_sd, Real};
use crate::oracle::PosteriorOracle;
use crate::quadrature::trapezoid;

/// Validation sizes below this get a [`Warning::SmallValidation`].
pub const MIN_VALIDATION: usize = 10;

/// Minimum number of points on an ISE grid.
pub const MIN_ISE_GRID: usize = 16;

/// `∫ (f̂(θ | x_o) - f(θ | x_o))² dθ` by the trapezoid rule on `grid`.
///
/// `observed` is in the estimator's standardized units. The grid must cover
/// the oracle support.
pub fn true_ise<T: Real>(
    estimate: &dyn ConditionalDensity<T>,
    observed: &[T],
    oracle: &PosteriorOracle<T>,
    grid: &EvalGrid<T>,
) -> Result<T> {
    let pts = grid.points();
    if pts.len() < MIN_ISE_GRID {
        return Err(Error::Config(format!(
            "ISE grid needs at least {MIN_ISE_GRID} points, got {}",
            pts.len()
        )));
    }
    let (lo, hi) = grid.range();
    let (a, b) = oracle.support();
    if lo > a || hi < b {
        return Err(Error::Config(format!(
            "ISE grid [{lo}, {hi}] does not cover the posterior support [{a}, {b}]"
        )));
    }
    let fitted = estimate.density_curve(pts, observed);
    let sq: Vec<T> = pts
        .iter()
        .zip(&fitted)
        .map(|(&t, &f)| {
            let e = f - oracle.density(t);
            e * e
        })
        .collect();
    Ok(trapezoid(pts, &sq))
}

/// Surrogate loss with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub estimator: String,
    pub value: f64,
    pub se: f64,
    pub b_prime: usize,
    pub warnings: Vec<Warning>,
}

fn loss_terms<T: Real>(estimate: &dyn ConditionalDensity<T>, validation: &TrainingSet<T>) -> Result<Vec<T>> {
    if validation.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let terms: Vec<T> = validation
        .covariates
        .iter_rows()
        .zip(&validation.thetas)
        .map(|(x, &t)| estimate.loss_term(t, x))
        .collect();
    if let Some(i) = terms.iter().position(|w| !w.is_finite()) {
        return Err(Error::Estimator(format!(
            "{} produced a non-finite loss term at validation point {i}",
            estimate.kind()
        )));
    }
    Ok(terms)
}

fn small_validation(n: usize) -> Vec<Warning> {
    if n < MIN_VALIDATION {
        log::warn!("validation set has only {n} points");
        vec![Warning::SmallValidation { size: n }]
    } else {
        Vec::new()
    }
}

fn standard_error<T: Real>(terms: &[T]) -> T {
    if terms.len() < 2 {
        return T::nan();
    }
    sample_sd(terms) / T::from_count(terms.len()).sqrt()
}

/// `L̂ = (1/B') Σ [∫ f̂²(θ | x'_k) dθ - 2 f̂(θ'_k | x'_k)]`.
pub fn surrogate_loss<T: Real>(
    estimate: &dyn ConditionalDensity<T>,
    validation: &TrainingSet<T>,
) -> Result<LossReport> {
    let terms = loss_terms(estimate, validation)?;
    let n = terms.len();
    let mut warnings = small_validation(n);
    warnings.extend(estimate.warnings());
    Ok(LossReport {
        estimator: estimate.kind().to_string(),
        value: (pairwise_sum(&terms) / T::from_count(n)).as_f64(),
        se: standard_error(&terms).as_f64(),
        b_prime: n,
        warnings,
    })
}

/// Index of the smallest loss; ties go to the earliest entry.
pub fn select(reports: &[LossReport]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in reports.iter().enumerate() {
        if r.value.is_nan() {
            continue;
        }
        if best.map_or(true, |b| r.value < reports[b].value) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    PreferFirst,
    PreferSecond,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// `L̂₁ - L̂₂`.
    pub delta: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub decision: Decision,
}

/// Paired comparison of two estimators on the same validation set.
pub fn compare_pair<T: Real>(
    first: &dyn ConditionalDensity<T>,
    second: &dyn ConditionalDensity<T>,
    validation: &TrainingSet<T>,
    confidence: f64,
) -> Result<ComparisonResult> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let a = loss_terms(first, validation)?;
    let b = loss_terms(second, validation)?;
    let n = a.len();
    if n < 2 {
        return Err(Error::Config(
            "paired comparison needs at least 2 validation points".into(),
        ));
    }
    small_validation(n);
    let diff: Vec<T> = a.iter().zip(&b).map(|(&x, &y)| x - y).collect();
    let delta = (pairwise_sum(&a) / T::from_count(n) - pairwise_sum(&b) / T::from_count(n)).as_f64();
    let se = standard_error(&diff).as_f64();
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let ci = (delta - z * se, delta + z * se);
    let decision = if ci.0 <= 0.0 && ci.1 >= 0.0 {
        Decision::Inconclusive
    } else if delta < 0.0 {
        Decision::PreferFirst
    } else {
        Decision::PreferSecond
    };
    Ok(ComparisonResult {
        delta,
        se,
        ci,
        decision,
    })
}
