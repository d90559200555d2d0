//! One-dimensional quadrature rules.

use crate::num::Real;

/// Trapezoid rule over a (possibly non-uniform) grid of abscissae.
///
/// # Panics
/// If `grid` and `values` differ in length.
pub fn trapezoid<T: Real>(grid: &[T], values: &[T]) -> T {
    assert_eq!(grid.len(), values.len(), "grid/value length mismatch");
    let two = T::lit(2.0);
    grid.windows(2)
        .zip(values.windows(2))
        .fold(T::zero(), |acc, (g, v)| acc + (g[1] - g[0]) * (v[0] + v[1]) / two)
}

/// Trapezoid rule for `f` sampled at `grid`.
pub fn trapezoid_fn<T: Real, F: Fn(T) -> T>(grid: &[T], f: F) -> T {
    let values: Vec<T> = grid.iter().map(|&t| f(t)).collect();
    trapezoid(grid, &values)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    // Start from a few panels so narrow peaks are not missed by the first
    // five-point estimate.
    const PANELS: usize = 16;
    let width = (b - a) / T::from_count(PANELS);
    let panel_tol = tol / T::from_count(PANELS);
    (0..PANELS)
        .map(|p| {
            let lo = a + width * T::from_count(p);
            let hi = if p + 1 == PANELS { b } else { lo + width };
            let fa = f(lo);
            let fb = f(hi);
            let m = (lo + hi) / T::lit(2.0);
            let fm = f(m);
            let whole = (hi - lo) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
            simpson_step(f, lo, hi, fa, fm, fb, whole, panel_tol, 48)
        })
        .fold(T::zero(), |acc, v| acc + v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: usize) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / T::lit(6.0) * (fa + T::lit(4.0) * flm + fm);
    let right = (b - m) / T::lit(6.0) * (fm + T::lit(4.0) * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::linspace;

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let g = linspace(0.0, 2.0, 5);
        let v: Vec<f64> = g.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&g, &v) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = adaptive_simpson(&f, -12.0, 12.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn simpson_in_single_precision() {
        let v = adaptive_simpson(&|x: f32| x * x, 0.0, 3.0, 1e-5);
        assert!((v - 9.0).abs() < 1e-4);
    }
}
