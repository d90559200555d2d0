//! Gaussian kernel sums over sorted samples.

use crate::error::{Error, Result};
use crate::num::{pairwise_sum, Real};

/// Kernel contributions beyond this many bandwidths are dropped (`φ(12) ≈ 2e-32`).
pub const TRUNCATION: f64 = 12.0;

/// `1 / (2√π)`: `∫ K(t) K(t - d) dt` at `d = 0` for the standard normal kernel.
pub fn self_convolution_at_zero<T: Real>() -> T {
    T::one() / (T::lit(2.0) * T::PI().sqrt())
}

/// Standard normal density.
#[inline]
pub fn gauss<T: Real>(u: T) -> T {
    (-(u * u) / T::lit(2.0)).exp() / T::lit((2.0 * std::f64::consts::PI).sqrt())
}

/// `∫ K_h(t - a) K_h(t - b) dt` with `d = a - b`.
#[inline]
pub fn convolution<T: Real>(d: T, h: T) -> T {
    self_convolution_at_zero::<T>() * (-(d * d) / (T::lit(4.0) * h * h)).exp() / h
}

/// Weighted Gaussian KDE `Σ w_i K_h(θ - θ_i)` over points kept in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSum<T> {
    points: Vec<T>,
    /// Normalized weights aligned with `points`; `None` means uniform.
    weights: Option<Vec<T>>,
    h: T,
    squared_integral: T,
}

impl<T: Real> KernelSum<T> {
    pub fn new(points: &[T], weights: Option<&[T]>, h: T) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateSample("kernel sum over no points".into()));
        }
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .partial_cmp(&points[b])
                .expect("finite kernel centers")
                .then(a.cmp(&b))
        });
        let sorted: Vec<T> = order.iter().map(|&i| points[i]).collect();
        let weights = match weights {
            None => None,
            Some(w) => {
                if w.len() != points.len() || w.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
                    return Err(Error::Config("kernel weights must be finite and nonnegative".into()));
                }
                let total = pairwise_sum(w);
                if !(total > T::zero()) {
                    return Err(Error::DegenerateSample("kernel weights sum to zero".into()));
                }
                Some(order.iter().map(|&i| w[i] / total).collect())
            }
        };
        let mut k = Self {
            points: sorted,
            weights,
            h,
            squared_integral: T::zero(),
        };
        k.squared_integral = k.compute_squared_integral();
        Ok(k)
    }

    pub fn bandwidth(&self) -> T {
        self.h
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    fn weight(&self, i: usize) -> T {
        match &self.weights {
            Some(w) => w[i],
            None => T::one() / T::from_count(self.points.len()),
        }
    }

    fn window(&self, theta: T, reach: T) -> (usize, usize) {
        let lo = self.points.partition_point(|&p| p < theta - reach);
        let hi = self.points.partition_point(|&p| p <= theta + reach);
        (lo, hi)
    }

    pub fn density(&self, theta: T) -> T {
        let (lo, hi) = self.window(theta, self.h * T::lit(TRUNCATION));
        let mut acc = T::zero();
        for i in lo..hi {
            acc = acc + self.weight(i) * gauss((theta - self.points[i]) / self.h);
        }
        acc / self.h
    }

    /// `∫ f̂²` in closed form: `Σ_i Σ_j w_i w_j ∫ K_h(t - θ_i) K_h(t - θ_j) dt`.
    pub fn squared_integral(&self) -> T {
        self.squared_integral
    }

    fn compute_squared_integral(&self) -> T {
        let reach = self.h * T::lit(TRUNCATION);
        let two = T::lit(2.0);
        let mut rows = Vec::with_capacity(self.points.len());
        for i in 0..self.points.len() {
            let wi = self.weight(i);
            let mut acc = wi * wi * convolution(T::zero(), self.h);
            let mut j = i + 1;
            while j < self.points.len() && self.points[j] - self.points[i] <= reach {
                acc = acc + two * wi * self.weight(j) * convolution(self.points[j] - self.points[i], self.h);
                j += 1;
            }
            rows.push(acc);
        }
        pairwise_sum(&rows)
    }
}
