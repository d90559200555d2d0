//! Closed-form posterior densities used as ground truth.
//!
//! An oracle is truncated to the central `[q(1e-4), q(1 - 1e-4)]` interval of
//! the analytic posterior and renormalized there, so it integrates to one
//! over a bounded support that finite grids can cover.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::quadrature::adaptive_simpson;

/// Tail probability cut from each side of the analytic posterior.
pub const TAIL_PROBABILITY: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", bound = "T: Real")]
pub enum PosteriorShape<T> {
    Normal {
        mean: T,
        sd: T,
    },
    /// Gamma with shape/rate parameterization.
    Gamma {
        shape: T,
        rate: T,
    },
    StudentT {
        location: T,
        scale: T,
        dof: T,
    },
    NormalMixture {
        weights: Vec<T>,
        means: Vec<T>,
        sds: Vec<T>,
    },
}

impl<T: Real> PosteriorShape<T> {
    /// Untruncated density.
    pub fn density(&self, theta: T) -> T {
        match self {
            PosteriorShape::Normal { mean, sd } => normal_pdf(theta, *mean, *sd),
            PosteriorShape::Gamma { shape, rate } => {
                if theta <= T::zero() {
                    return T::zero();
                }
                let log = (*shape - T::one()) * theta.ln() - *rate * theta + *shape * rate.ln()
                    - T::lit(ln_gamma(shape.as_f64()));
                log.exp()
            }
            PosteriorShape::StudentT { location, scale, dof } => {
                let z = (theta - *location) / *scale;
                let half = T::lit(0.5);
                let log_norm = T::lit(ln_gamma((dof.as_f64() + 1.0) * 0.5) - ln_gamma(dof.as_f64() * 0.5))
                    - half * (*dof * T::PI()).ln()
                    - scale.ln();
                (log_norm - (*dof + T::one()) * half * (T::one() + z * z / *dof).ln()).exp()
            }
            PosteriorShape::NormalMixture { weights, means, sds } => weights
                .iter()
                .zip(means)
                .zip(sds)
                .fold(T::zero(), |acc, ((&w, &m), &s)| acc + w * normal_pdf(theta, m, s)),
        }
    }

    pub fn cdf(&self, theta: T) -> T {
        let x = theta.as_f64();
        let v = match self {
            PosteriorShape::Normal { mean, sd } => std_normal(mean.as_f64(), sd.as_f64()).cdf(x),
            PosteriorShape::Gamma { shape, rate } => Gamma::new(shape.as_f64(), rate.as_f64())
                .expect("validated gamma posterior")
                .cdf(x),
            PosteriorShape::StudentT { location, scale, dof } => {
                StudentsT::new(location.as_f64(), scale.as_f64(), dof.as_f64())
                    .expect("validated student-t posterior")
                    .cdf(x)
            }
            PosteriorShape::NormalMixture { weights, means, sds } => weights
                .iter()
                .zip(means)
                .zip(sds)
                .map(|((w, m), s)| w.as_f64() * std_normal(m.as_f64(), s.as_f64()).cdf(x))
                .sum(),
        };
        T::lit(v)
    }

    pub fn quantile(&self, p: f64) -> T {
        let v = match self {
            PosteriorShape::Normal { mean, sd } => std_normal(mean.as_f64(), sd.as_f64()).inverse_cdf(p),
            PosteriorShape::Gamma { shape, rate } => Gamma::new(shape.as_f64(), rate.as_f64())
                .expect("validated gamma posterior")
                .inverse_cdf(p),
            PosteriorShape::StudentT { location, scale, dof } => {
                StudentsT::new(location.as_f64(), scale.as_f64(), dof.as_f64())
                    .expect("validated student-t posterior")
                    .inverse_cdf(p)
            }
            PosteriorShape::NormalMixture { means, sds, .. } => {
                let mut lo = means
                    .iter()
                    .zip(sds)
                    .map(|(m, s)| m.as_f64() - 12.0 * s.as_f64())
                    .fold(f64::INFINITY, f64::min);
                let mut hi = means
                    .iter()
                    .zip(sds)
                    .map(|(m, s)| m.as_f64() + 12.0 * s.as_f64())
                    .fold(f64::NEG_INFINITY, f64::max);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(T::lit(mid)).as_f64() < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        T::lit(v)
    }

    pub fn mean(&self) -> T {
        match self {
            PosteriorShape::Normal { mean, .. } => *mean,
            PosteriorShape::Gamma { shape, rate } => *shape / *rate,
            PosteriorShape::StudentT { location, .. } => *location,
            PosteriorShape::NormalMixture { weights, means, .. } => {
                weights.iter().zip(means).fold(T::zero(), |acc, (&w, &m)| acc + w * m)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        let ok = match self {
            PosteriorShape::Normal { mean, sd } => mean.is_finite() && positive(*sd),
            PosteriorShape::Gamma { shape, rate } => positive(*shape) && positive(*rate),
            PosteriorShape::StudentT { location, scale, dof } => {
                location.is_finite() && positive(*scale) && positive(*dof)
            }
            PosteriorShape::NormalMixture { weights, means, sds } => {
                !weights.is_empty()
                    && weights.len() == means.len()
                    && weights.len() == sds.len()
                    && weights.iter().all(|&w| w >= T::zero() && w.is_finite())
                    && means.iter().all(|m| m.is_finite())
                    && sds.iter().all(|&s| positive(s))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid posterior parameters: {self:?}")))
        }
    }
}

/// Analytic posterior truncated to its central `1 - 2e-4` probability interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PosteriorOracle<T> {
    shape: PosteriorShape<T>,
    lower: T,
    upper: T,
    mass: T,
}

impl<T: Real> PosteriorOracle<T> {
    pub fn new(shape: PosteriorShape<T>) -> Result<Self> {
        shape.validate()?;
        let lower = shape.quantile(TAIL_PROBABILITY);
        let upper = shape.quantile(1.0 - TAIL_PROBABILITY);
        let mass = shape.cdf(upper) - shape.cdf(lower);
        if !(lower < upper) || !(mass > T::zero()) {
            return Err(Error::Domain(format!(
                "posterior support collapsed to [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            shape,
            lower,
            upper,
            mass,
        })
    }

    pub fn shape(&self) -> &PosteriorShape<T> {
        &self.shape
    }

    pub fn support(&self) -> (T, T) {
        (self.lower, self.upper)
    }

    /// Probability mass of the untruncated posterior inside the support.
    pub fn support_mass(&self) -> T {
        self.mass
    }

    pub fn density(&self, theta: T) -> T {
        if theta < self.lower || theta > self.upper {
            T::zero()
        } else {
            self.shape.density(theta) / self.mass
        }
    }

    pub fn mean(&self) -> T {
        self.shape.mean()
    }

    /// `∫ f²(θ) dθ` over the support, by adaptive quadrature.
    pub fn squared_integral(&self) -> T {
        let f = |t: T| {
            let d = self.density(t);
            d * d
        };
        adaptive_simpson(&f, self.lower, self.upper, T::lit(1e-10))
    }

    /// Total mass over the support by adaptive quadrature.
    pub fn integrate(&self) -> T {
        adaptive_simpson(&|t| self.density(t), self.lower, self.upper, T::lit(1e-10))
    }
}

pub(crate) fn normal_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    (-(z * z) / T::lit(2.0)).exp() / (sd * T::lit(2.0 * std::f64::consts::PI).sqrt())
}

pub(crate) fn ln_normal_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    -(z * z) / T::lit(2.0) - sd.ln() - T::lit(0.5 * (2.0 * std::f64::consts::PI).ln())
}

fn std_normal(mean: f64, sd: f64) -> Normal {
    Normal::new(mean, sd).expect("validated normal posterior")
}
