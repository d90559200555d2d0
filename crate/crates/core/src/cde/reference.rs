//! Fixed densities used as baselines and in tests: the true posterior, a
//! uniform density and the zero function.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::oracle::PosteriorOracle;

use super::ConditionalDensity;

/// The posterior at the observed data, used as an estimate for every `x`.
#[derive(Debug, Clone)]
pub struct OracleEstimate<T> {
    oracle: PosteriorOracle<T>,
    squared_integral: T,
}

impl<T: Real> OracleEstimate<T> {
    pub fn new(oracle: PosteriorOracle<T>) -> Self {
        let squared_integral = oracle.squared_integral();
        Self {
            oracle,
            squared_integral,
        }
    }

    pub fn oracle(&self) -> &PosteriorOracle<T> {
        &self.oracle
    }
}

impl<T: Real> ConditionalDensity<T> for OracleEstimate<T> {
    fn kind(&self) -> &str {
        "oracle"
    }

    fn density(&self, theta: T, _x: &[T]) -> T {
        self.oracle.density(theta)
    }

    fn squared_integral(&self, _x: &[T]) -> T {
        self.squared_integral
    }
}

/// Uniform density on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformEstimate<T> {
    lower: T,
    upper: T,
}

impl<T: Real> UniformEstimate<T> {
    pub fn new(lower: T, upper: T) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::Config(format!("empty uniform support [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }
}

impl<T: Real> ConditionalDensity<T> for UniformEstimate<T> {
    fn kind(&self) -> &str {
        "uniform"
    }

    fn density(&self, theta: T, _x: &[T]) -> T {
        if theta >= self.lower && theta <= self.upper {
            T::one() / (self.upper - self.lower)
        } else {
            T::zero()
        }
    }

    fn squared_integral(&self, _x: &[T]) -> T {
        T::one() / (self.upper - self.lower)
    }
}

/// `f̂ ≡ 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroEstimate;

impl<T: Real> ConditionalDensity<T> for ZeroEstimate {
    fn kind(&self) -> &str {
        "zero"
    }

    fn density(&self, _theta: T, _x: &[T]) -> T {
        T::zero()
    }

    fn squared_integral(&self, _x: &[T]) -> T {
        T::zero()
    }
}
