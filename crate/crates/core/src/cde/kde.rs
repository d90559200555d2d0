//! Marginal kernel density estimate of the accepted θ values.

use serde::{Deserialize, Serialize};

use crate::abc::TrainingSet;
use crate::error::{Error, Result};
use crate::num::{logspace, pairwise_sum, sample_sd, Real};
use crate::summaries::quantile_sorted;

use super::kernel::{gauss, KernelSum, TRUNCATION};
use super::{ConditionalDensity, Tuning};

/// Cross-validation runs on at most this many points; larger samples are
/// thinned by order statistics and the bandwidth rescaled by `(m / n)^{1/5}`.
pub const CV_SUBSAMPLE: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdeConfig {
    /// Number of candidate bandwidths.
    pub grid_size: usize,
    /// Grid spans `[lower, upper] ×` the normal-reference bandwidth.
    pub lower: f64,
    pub upper: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            grid_size: 40,
            lower: 0.05,
            upper: 3.0,
        }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size == 0 || !(self.lower > 0.0 && self.upper >= self.lower) {
            return Err(Error::Config("KDE bandwidth grid is empty or inverted".into()));
        }
        Ok(())
    }
}

/// Leave-one-out likelihood cross-validated bandwidth.
pub fn cv_bandwidth<T: Real>(points: &[T], weights: Option<&[T]>, cfg: &KdeConfig) -> Result<T> {
    cfg.validate()?;
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateSample("bandwidth selection needs two points".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).expect("finite θ").then(a.cmp(&b)));
    let sorted: Vec<T> = order.iter().map(|&i| points[i]).collect();
    let sd = sample_sd(&sorted);
    if !(sd > T::zero()) {
        return Err(Error::DegenerateSample("θ sample has zero variance".into()));
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > T::zero() {
        sd.min(iqr / T::lit(1.34))
    } else {
        sd
    };
    let reference = T::lit(1.06) * spread * T::from_count(n).powf(T::lit(-0.2));

    // thin by order statistics when large; weights travel with their points
    let (pts, wts, scale) = if n > CV_SUBSAMPLE {
        let m = CV_SUBSAMPLE;
        let picks: Vec<usize> = (0..m).map(|k| ((2 * k + 1) * n) / (2 * m)).collect();
        let pts: Vec<T> = picks.iter().map(|&p| sorted[p]).collect();
        let wts = weights.map(|w| picks.iter().map(|&p| w[order[p]]).collect::<Vec<T>>());
        (pts, wts, T::from_count(m) / T::from_count(n))
    } else {
        let wts = weights.map(|w| order.iter().map(|&i| w[i]).collect::<Vec<T>>());
        (sorted, wts, T::one())
    };
    let grid = logspace(
        reference * T::lit(cfg.lower),
        reference * T::lit(cfg.upper),
        cfg.grid_size,
    );
    let grid: Vec<T> = grid.into_iter().map(|h| h / scale.powf(T::lit(0.2))).collect();
    let mut best: Option<(T, T)> = None;
    for &h in &grid {
        let score = loo_log_likelihood(&pts, wts.as_deref(), h);
        if score.is_finite() && best.is_none_or(|(_, s)| score > s) {
            best = Some((h, score));
        }
    }
    let (h, _) =
        best.ok_or_else(|| Error::DegenerateSample("no bandwidth gave a finite cross-validated likelihood".into()))?;
    Ok(h * scale.powf(T::lit(0.2)))
}

/// `Σ_i w_i log f̂_{-i}(θ_i)` for sorted `points`.
fn loo_log_likelihood<T: Real>(points: &[T], weights: Option<&[T]>, h: T) -> T {
    let n = points.len();
    let reach = h * T::lit(TRUNCATION);
    let w = |i: usize| weights.map_or(T::one(), |w| w[i]);
    let total: T = match weights {
        Some(ws) => pairwise_sum(ws),
        None => T::from_count(n),
    };
    let mut terms = Vec::with_capacity(n);
    let mut lo = 0;
    for i in 0..n {
        if !(w(i) > T::zero()) {
            continue;
        }
        while points[i] - points[lo] > reach {
            lo += 1;
        }
        let mut acc = T::zero();
        let mut j = lo;
        while j < n && points[j] - points[i] <= reach {
            if j != i {
                acc = acc + w(j) * gauss((points[i] - points[j]) / h);
            }
            j += 1;
        }
        let rest = total - w(i);
        if !(rest > T::zero()) {
            continue;
        }
        let dens = acc / (rest * h);
        terms.push(w(i) * dens.ln());
    }
    pairwise_sum(&terms)
}

/// Gaussian KDE of θ that ignores the covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcKde<T> {
    kernel: KernelSum<T>,
    kind: &'static str,
}

impl<T: Real> AbcKde<T> {
    pub fn with_bandwidth(thetas: &[T], weights: Option<&[T]>, h: T) -> Result<Self> {
        Ok(Self {
            kernel: KernelSum::new(thetas, weights, h)?,
            kind: "abc_kde",
        })
    }

    pub fn fit_weighted(thetas: &[T], weights: Option<&[T]>, cfg: &KdeConfig) -> Result<Self> {
        let h = cv_bandwidth(thetas, weights, cfg)?;
        Self::with_bandwidth(thetas, weights, h)
    }

    pub(crate) fn relabel(mut self, kind: &'static str) -> Self {
        self.kind = kind;
        self
    }

    pub fn bandwidth(&self) -> T {
        self.kernel.bandwidth()
    }
}

/// Fits the ABC baseline: a cross-validated KDE of the accepted θ.
pub fn fit_abc_kde<T: Real>(train: &TrainingSet<T>, cfg: &KdeConfig) -> Result<AbcKde<T>> {
    if train.len() < 10 {
        return Err(Error::Config(format!(
            "ABC-KDE needs at least 10 accepted pairs, got {}",
            train.len()
        )));
    }
    AbcKde::fit_weighted(&train.thetas, None, cfg)
}

impl<T: Real> ConditionalDensity<T> for AbcKde<T> {
    fn kind(&self) -> &str {
        self.kind
    }

    fn tuning(&self) -> Tuning {
        Tuning::from([("h".to_string(), self.bandwidth().as_f64())])
    }

    fn density(&self, theta: T, _x: &[T]) -> T {
        self.kernel.density(theta)
    }

    fn squared_integral(&self, _x: &[T]) -> T {
        self.kernel.squared_integral()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::linspace;
    use crate::quadrature::trapezoid_fn;
    use crate::rng::stream;

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed);
        (0..n).map(|_| f64::standard_normal(&mut rng)).collect()
    }

    #[test]
    fn normal_sample_gives_centered_normalized_estimate() {
        let xs = normal_sample(5000, 1);
        let k = AbcKde::fit_weighted(&xs, None, &KdeConfig::default()).unwrap();
        let grid = linspace(-8.0, 8.0, 4001);
        assert!((trapezoid_fn(&grid, |t| k.density(t, &[])) - 1.0).abs() < 1e-6);
        let m = trapezoid_fn(&grid, |t| t * k.density(t, &[]));
        assert!(m.abs() < 3.0 / (5000f64).sqrt());
        // reference bandwidth for n = 5000 is about 0.19
        assert!(k.bandwidth() > 0.05 && k.bandwidth() < 0.5, "h = {}", k.bandwidth());
    }

    #[test]
    fn covariates_are_ignored() {
        let xs = normal_sample(200, 2);
        let k = AbcKde::fit_weighted(&xs, None, &KdeConfig::default()).unwrap();
        for &t in &[-1.0, 0.0, 0.4] {
            assert_eq!(k.density(t, &[0.0, 1.0]), k.density(t, &[5.0, -3.0]));
        }
    }

    #[test]
    fn constant_sample_is_degenerate() {
        assert!(matches!(
            AbcKde::fit_weighted(&[1.0; 20], None, &KdeConfig::default()),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn subsampled_cv_lands_near_exact_cv() {
        let xs = normal_sample(4000, 3);
        let h_sub = cv_bandwidth(&xs, None, &KdeConfig::default()).unwrap();
        // exact CV on the full sample, computed with a larger subsample cap
        let sorted = {
            let mut s = xs.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s
        };
        let reference = 1.06 * sample_sd(&sorted) * 4000f64.powf(-0.2);
        let grid = logspace(reference * 0.05, reference * 3.0, 40);
        let h_full = grid
            .iter()
            .copied()
            .max_by(|&a, &b| {
                loo_log_likelihood(&sorted, None, a)
                    .partial_cmp(&loo_log_likelihood(&sorted, None, b))
                    .unwrap()
            })
            .unwrap();
        assert!((h_sub / h_full - 1.0).abs() < 0.35, "{h_sub} vs {h_full}");
    }
}
