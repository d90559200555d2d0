//! Numerical check relating the relevance of a statistic to the posterior
//! with its relevance to the basis-coefficient regressions.
//!
//! For a posterior that depends on the covariates only through one
//! coordinate `x_j`, with θ mapped onto `[0, 1]`,
//! `r_j = ∫∫∫ (f(u|x) - f(u|x'))² du dx dx'` and
//! `r_{i,j} = ∫∫ (β_i(x) - β_i(x'))² dx dx'` with `β_i(x) = ∫ φ_i(u) f(u|x) du`.
//! Orthonormality gives `r_j = Σ_i r_{i,j}`; truncating at `I` leaves a tail
//! that shrinks as `I` grows.

use serde::{Deserialize, Serialize};

use crate::cde::basis::fourier_values;
use crate::num::{linspace, Real};
use crate::quadrature::trapezoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RelevanceProfile<T> {
    /// `r_j` by direct quadrature.
    pub total: T,
    /// `(I, Σ_{i≤I} r_{i,j})` for each requested cutoff.
    pub partial: Vec<(usize, T)>,
}

impl<T: Real> RelevanceProfile<T> {
    /// `|r_j - Σ_{i≤I} r_{i,j}|` per cutoff.
    pub fn gaps(&self) -> Vec<(usize, T)> {
        self.partial.iter().map(|&(i, s)| (i, (self.total - s).abs())).collect()
    }
}

/// Computes the relevance profile of a single coordinate.
///
/// `density(theta, x)` is the posterior on the original θ scale, restricted
/// to `theta_range`, which is mapped to `[0, 1]`. Quadrature uses `n_theta`
/// points in θ and `n_x` points over `x_range`.
pub fn relevance_profile<T: Real, F: Fn(T, T) -> T>(
    density: F,
    theta_range: (T, T),
    x_range: (T, T),
    cutoffs: &[usize],
    n_theta: usize,
    n_x: usize,
) -> RelevanceProfile<T> {
    let (a, b) = theta_range;
    let width = b - a;
    let us: Vec<T> = linspace(T::zero(), T::one(), n_theta);
    let xs: Vec<T> = linspace(x_range.0, x_range.1, n_x);
    let i_max = cutoffs.iter().copied().max().unwrap_or(0);
    let phi: Vec<Vec<T>> = us
        .iter()
        .map(|&u| {
            let mut v = vec![T::zero(); i_max];
            fourier_values(u, &mut v);
            v
        })
        .collect();
    // unit-scale densities and their basis coefficients per x
    let dens: Vec<Vec<T>> = xs
        .iter()
        .map(|&x| us.iter().map(|&u| width * density(a + width * u, x)).collect())
        .collect();
    let beta: Vec<Vec<T>> = dens
        .iter()
        .map(|f| {
            (0..i_max)
                .map(|i| {
                    let prod: Vec<T> = f.iter().zip(&phi).map(|(&fv, p)| fv * p[i]).collect();
                    trapezoid(&us, &prod)
                })
                .collect()
        })
        .collect();
    let double_integral = |g: &dyn Fn(usize, usize) -> T| {
        let rows: Vec<T> = (0..n_x)
            .map(|p| {
                let inner: Vec<T> = (0..n_x).map(|q| g(p, q)).collect();
                trapezoid(&xs, &inner)
            })
            .collect();
        trapezoid(&xs, &rows)
    };
    let total = double_integral(&|p, q| {
        let sq: Vec<T> = dens[p].iter().zip(&dens[q]).map(|(&f, &g)| (f - g) * (f - g)).collect();
        trapezoid(&us, &sq)
    });
    let per_basis: Vec<T> = (0..i_max)
        .map(|i| {
            double_integral(&|p, q| {
                let d = beta[p][i] - beta[q][i];
                d * d
            })
        })
        .collect();
    let partial = cutoffs
        .iter()
        .map(|&c| (c, per_basis[..c].iter().copied().sum()))
        .collect();
    RelevanceProfile { total, partial }
}
