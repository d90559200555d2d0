use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Fraction of the training range added on each side before rescaling.
pub const RANGE_PADDING: f64 = 0.05;

/// Fourier basis on `[0, 1]` composed with the affine map `[a, b] -> [0, 1]`:
/// `φ_1 = 1`, `φ_{2i} = √2 cos(2πiu)`, `φ_{2i+1} = √2 sin(2πiu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FourierBasis<T> {
    lower: T,
    upper: T,
    i_max: usize,
}

impl<T: Real> FourierBasis<T> {
    pub fn new(lower: T, upper: T, i_max: usize) -> Result<Self> {
        if i_max == 0 {
            return Err(Error::Config("basis size must be at least 1".into()));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Config(format!("invalid basis range [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper, i_max })
    }

    /// Range from the extremes of `thetas`, padded by 5% on each side.
    pub fn from_sample(thetas: &[T], i_max: usize) -> Result<Self> {
        let (lo, hi) = padded_range(thetas)?;
        Self::new(lo, hi, i_max)
    }

    pub fn range(&self) -> (T, T) {
        (self.lower, self.upper)
    }

    pub fn len(&self) -> usize {
        self.i_max
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_unit(&self, theta: T) -> T {
        (theta - self.lower) / (self.upper - self.lower)
    }

    /// Jacobian `1 / (b - a)` converting unit-scale densities to the θ scale.
    pub fn jacobian(&self) -> T {
        T::one() / (self.upper - self.lower)
    }

    /// Writes `φ_1(u) … φ_{len}(u)` into `out` (which must hold `len()` values).
    pub fn eval_unit(&self, u: T, out: &mut [T]) {
        fourier_values(u, &mut out[..self.i_max]);
    }

    pub fn eval(&self, theta: T, out: &mut [T]) {
        self.eval_unit(self.to_unit(theta), out);
    }
}

/// Fills `out` with the first `out.len()` Fourier basis functions at `u`.
/// Uses the angle-addition recurrence, accurate to ~1e-13 for a few hundred terms.
pub fn fourier_values<T: Real>(u: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    out[0] = T::one();
    let sqrt2 = T::SQRT_2();
    let a = T::lit(2.0) * T::PI() * u;
    let (s1, c1) = a.sin_cos();
    let (mut s, mut c) = (s1, c1);
    let mut i = 1;
    while i < out.len() {
        out[i] = sqrt2 * c;
        if i + 1 < out.len() {
            out[i + 1] = sqrt2 * s;
        }
        i += 2;
        let next_c = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = next_c;
    }
}

/// `[min - 5% span, max + 5% span]` of the sample.
pub fn padded_range<T: Real>(thetas: &[T]) -> Result<(T, T)> {
    let (lo, hi) = thetas.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &t| {
        (lo.min(t), hi.max(t))
    });
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateSample(
            "θ sample has zero range; cannot set the basis interval".into(),
        ));
    }
    let pad = (hi - lo) * T::lit(RANGE_PADDING);
    Ok((lo - pad, hi + pad))
}
