//! Scalar abstraction shared by every estimator in the crate.
//!
//! All numerical code is written against [`Real`], which is implemented for
//! `f32` and `f64`. Random variates are drawn through the trait so that
//! generic code does not need to carry `rand_distr` bounds around.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + for<'a> Sum<&'a Self>
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self;

    /// Converts a count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma variate with the given shape and unit scale. `shape` must be positive.
    fn unit_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;

    /// Uniform variate on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn unit_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0)
                    .expect("gamma shape validated by caller")
                    .sample(rng)
            }

            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Pairwise (cascade) summation. The result depends only on the input order,
/// not on how the slice was produced.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean<T: Real>(values: &[T]) -> T {
    pairwise_sum(values) / T::from_count(values.len())
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_sd<T: Real>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(values);
    let sq: Vec<T> = values.iter().map(|&v| (v - m) * (v - m)).collect();
    (pairwise_sum(&sq) / T::from_count(n - 1)).sqrt()
}

/// `count` points equally spaced over `[lo, hi]`, both ends included.
pub fn linspace<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_count(count - 1);
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo + step * T::from_count(i)
                    }
                })
                .collect()
        }
    }
}

/// `count` points equally spaced in log scale over `[lo, hi]`.
pub fn logspace<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    linspace(lo.ln(), hi.ln(), count).into_iter().map(Float::exp).collect()
}
