//! Series CDE: `f̂(θ|x) = Σ_{i≤I} β̂_i(x) φ_i(θ)` with each coefficient
//! `β_i(x) = E[φ_i(θ) | x]` estimated by regression.
//!
//! The series is evaluated on a fixed unit grid, clipped at zero and
//! renormalized there; densities are reported on the original θ scale.

use serde::{Deserialize, Serialize};

use crate::abc::TrainingSet;
use crate::error::{Error, Result, Warning};
use crate::linalg::Matrix;
use crate::num::{linspace, pairwise_sum, Real};
use crate::regression::{KnnRegressor, RegressionMethod, Regressor};

use super::basis::{fourier_values, FourierBasis};
use super::{ConditionalDensity, Tuning, GRID_POINTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexCodeConfig {
    /// Largest series cutoff considered.
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    pub regressor: RegressionMethod,
}

fn default_i_max() -> usize {
    31
}

impl FlexCodeConfig {
    pub fn nearest_neighbors(k_grid: Vec<usize>) -> Self {
        Self {
            i_max: default_i_max(),
            regressor: RegressionMethod::NearestNeighbors { k_grid },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_max == 0 {
            return Err(Error::Config("FlexCode i_max must be at least 1".into()));
        }
        self.regressor.validate()
    }
}

pub(crate) fn label(method: &RegressionMethod) -> &'static str {
    match method {
        RegressionMethod::NearestNeighbors { .. } => "flexcode_nn",
        RegressionMethod::TreeEnsemble(_) => "flexcode_rf",
    }
}

enum Fitted<T: Real> {
    Knn(KnnRegressor<T>),
    Other(Box<dyn Regressor<T>>),
}

impl<T: Real> Fitted<T> {
    fn predict(&self, x: &[T]) -> Vec<T> {
        match self {
            Fitted::Knn(r) => r.predict(x),
            Fitted::Other(r) => r.predict(x),
        }
    }
}

/// Unit grid with the basis tabulated column-wise (`cols[i][g] = φ_{i+1}(u_g)`).
struct UnitGrid<T> {
    points: Vec<T>,
    step: T,
    cols: Vec<Vec<T>>,
}

impl<T: Real> UnitGrid<T> {
    fn new(i_max: usize) -> Self {
        let points: Vec<T> = linspace(T::zero(), T::one(), GRID_POINTS);
        let mut cols = vec![Vec::with_capacity(GRID_POINTS); i_max];
        let mut buf = vec![T::zero(); i_max];
        for &u in &points {
            fourier_values(u, &mut buf);
            for (c, &v) in cols.iter_mut().zip(&buf) {
                c.push(v);
            }
        }
        Self {
            points,
            step: T::one() / T::from_count(GRID_POINTS - 1),
            cols,
        }
    }

    /// Trapezoid integrals of `max(f, 0)` and `max(f, 0)²`.
    fn clipped_moments(&self, curve: &[T]) -> (T, T) {
        let half = T::lit(0.5);
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        let last = curve.len() - 1;
        for (g, &v) in curve.iter().enumerate() {
            let c = v.max(T::zero());
            let w = if g == 0 || g == last { half } else { T::one() };
            m1 = m1 + w * c;
            m2 = m2 + w * c * c;
        }
        (m1 * self.step, m2 * self.step)
    }

    fn curve(&self, beta: &[T]) -> Vec<T> {
        let mut curve = vec![T::zero(); self.points.len()];
        for (b, col) in beta.iter().zip(&self.cols) {
            for (c, &p) in curve.iter_mut().zip(col) {
                *c = *c + *b * p;
            }
        }
        curve
    }
}

pub struct FlexCode<T: Real> {
    basis: FourierBasis<T>,
    model: Fitted<T>,
    cutoff: usize,
    k: Option<usize>,
    grid: UnitGrid<T>,
    label: &'static str,
    /// Surrogate loss per cutoff `I = 1..=i_max` at the chosen regressor setting.
    losses: Vec<T>,
    warnings: Vec<Warning>,
}

impl<T: Real> FlexCode<T> {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn basis(&self) -> &FourierBasis<T> {
        &self.basis
    }

    pub fn cutoff_losses(&self) -> &[T] {
        &self.losses
    }

    /// Fitted coefficients `β̂_1(x) … β̂_I(x)` at the chosen cutoff.
    pub fn coefficients(&self, x: &[T]) -> Result<Vec<T>> {
        let mut beta = self.model.predict(x);
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Estimator("regression produced non-finite coefficients".into()));
        }
        beta.truncate(self.cutoff);
        Ok(beta)
    }

    /// Clipped unit-scale curve on the grid and its normalizing mass.
    fn normalized(&self, x: &[T]) -> (Vec<T>, Vec<T>, T) {
        let beta = self.coefficients(x).unwrap_or_else(|_| vec![T::zero(); self.cutoff]);
        let curve = self.grid.curve(&beta);
        let (mass, _) = self.grid.clipped_moments(&curve);
        (beta, curve, mass)
    }

    fn unit_value(&self, beta: &[T], theta: T) -> Option<T> {
        let u = self.basis.to_unit(theta);
        if !(u >= T::zero() && u <= T::one()) {
            return None;
        }
        let mut phi = vec![T::zero(); beta.len()];
        fourier_values(u, &mut phi);
        Some(
            beta.iter()
                .zip(&phi)
                .fold(T::zero(), |acc, (&b, &p)| acc + b * p)
                .max(T::zero()),
        )
    }
}

/// Fits FlexCode and selects the cutoff (and `k` for nearest neighbors) by
/// surrogate loss on `validation`. Ties go to the smallest `k`, then the smallest cutoff.
pub fn fit_flexcode<T: Real>(
    train: &TrainingSet<T>,
    validation: &TrainingSet<T>,
    cfg: &FlexCodeConfig,
    seed: u64,
) -> Result<FlexCode<T>> {
    cfg.validate()?;
    if validation.dim() != train.dim() {
        return Err(Error::Config(
            "validation and training covariates differ in dimension".into(),
        ));
    }
    let i_max = cfg.i_max;
    let basis = FourierBasis::from_sample(&train.thetas, i_max)?;
    let mut warnings = Vec::new();
    if i_max > train.len() / 10 {
        warnings.push(Warning::CutoffExceedsSample {
            cutoff: i_max,
            sample: train.len(),
        });
    }
    let mut y = Matrix::zeros(train.len(), i_max);
    for (r, &t) in train.thetas.iter().enumerate() {
        basis.eval(t, y.row_mut(r));
    }
    let grid = UnitGrid::new(i_max);
    let jac = basis.jacobian();

    // candidate coefficient vectors per validation point: one per k for NN
    let (model, ks, candidates): (Fitted<T>, Vec<usize>, Vec<Vec<Vec<T>>>) = match &cfg.regressor {
        RegressionMethod::NearestNeighbors { k_grid } => {
            let mut ks: Vec<usize> = k_grid.iter().copied().filter(|&k| k <= train.len()).collect();
            ks.sort_unstable();
            ks.dedup();
            let k_max = *ks.last().ok_or_else(|| {
                Error::Config(format!("every k in the grid exceeds the training size {}", train.len()))
            })?;
            let knn = KnnRegressor::fit(train.covariates.clone(), y, k_max)?;
            let cands = validation
                .covariates
                .iter_rows()
                .map(|x| {
                    let nb = knn.neighbors(x, k_max);
                    let mut acc = vec![T::zero(); i_max];
                    let mut out = Vec::with_capacity(ks.len());
                    let mut next = 0;
                    for (m, n) in nb.iter().enumerate() {
                        for (a, &v) in acc.iter_mut().zip(knn.responses().row(n.index)) {
                            *a = *a + v;
                        }
                        if ks[next] == m + 1 {
                            let kk = T::from_count(m + 1);
                            out.push(acc.iter().map(|&a| a / kk).collect());
                            next += 1;
                            if next == ks.len() {
                                break;
                            }
                        }
                    }
                    out
                })
                .collect();
            (Fitted::Knn(knn), ks, cands)
        }
        other => {
            let fitted = other.fit(&train.covariates, &y, seed)?;
            let cands = validation
                .covariates
                .iter_rows()
                .map(|x| vec![fitted.predict(x)])
                .collect();
            (Fitted::Other(fitted), vec![0], cands)
        }
    };

    // terms[a][i] collects W over validation points for setting a and cutoff i + 1
    let mut terms = vec![vec![Vec::with_capacity(validation.len()); i_max]; ks.len()];
    let mut phi_val = vec![T::zero(); i_max];
    let two = T::lit(2.0);
    for (cands, &theta) in candidates.iter().zip(&validation.thetas) {
        let u = basis.to_unit(theta);
        let inside = u >= T::zero() && u <= T::one();
        if inside {
            fourier_values(u, &mut phi_val);
        }
        for (a, beta) in cands.iter().enumerate() {
            if beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::Estimator("regression produced non-finite coefficients".into()));
            }
            let mut curve = vec![T::zero(); GRID_POINTS];
            let mut val = T::zero();
            for i in 0..i_max {
                for (c, &p) in curve.iter_mut().zip(&grid.cols[i]) {
                    *c = *c + beta[i] * p;
                }
                if inside {
                    val = val + beta[i] * phi_val[i];
                }
                let (mass, sq) = grid.clipped_moments(&curve);
                let w = if mass > T::zero() {
                    jac * sq / (mass * mass) - two * jac * val.max(T::zero()) / mass
                } else {
                    T::infinity()
                };
                terms[a][i].push(w);
            }
        }
    }
    let table: Vec<Vec<T>> = terms
        .iter()
        .map(|row| row.iter().map(|w| pairwise_sum(w) / T::from_count(w.len())).collect())
        .collect();
    let mut best = (0, 0);
    for (a, row) in table.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if v < table[best.0][best.1] {
                best = (a, i);
            }
        }
    }
    let (model, k) = match model {
        Fitted::Knn(knn) => {
            let k = ks[best.0];
            (Fitted::Knn(knn.with_k(k)?), Some(k))
        }
        other => (other, None),
    };
    Ok(FlexCode {
        basis,
        model,
        cutoff: best.1 + 1,
        k,
        grid,
        label: label(&cfg.regressor),
        losses: table[best.0].clone(),
        warnings,
    })
}

impl<T: Real> ConditionalDensity<T> for FlexCode<T> {
    fn kind(&self) -> &str {
        self.label
    }

    fn tuning(&self) -> Tuning {
        let mut t = Tuning::from([("I".to_string(), self.cutoff as f64)]);
        if let Some(k) = self.k {
            t.insert("k".into(), k as f64);
        }
        t
    }

    fn warnings(&self) -> Vec<Warning> {
        self.warnings.clone()
    }

    fn density(&self, theta: T, x: &[T]) -> T {
        let (beta, _, mass) = self.normalized(x);
        match self.unit_value(&beta, theta) {
            Some(v) if mass > T::zero() => self.basis.jacobian() * v / mass,
            _ => T::zero(),
        }
    }

    fn squared_integral(&self, x: &[T]) -> T {
        let (_, curve, mass) = self.normalized(x);
        if !(mass > T::zero()) {
            return T::zero();
        }
        let (_, sq) = self.grid.clipped_moments(&curve);
        self.basis.jacobian() * sq / (mass * mass)
    }

    fn density_curve(&self, thetas: &[T], x: &[T]) -> Vec<T> {
        let (beta, _, mass) = self.normalized(x);
        thetas
            .iter()
            .map(|&t| match self.unit_value(&beta, t) {
                Some(v) if mass > T::zero() => self.basis.jacobian() * v / mass,
                _ => T::zero(),
            })
            .collect()
    }

    fn loss_term(&self, theta: T, x: &[T]) -> T {
        let (beta, curve, mass) = self.normalized(x);
        if !(mass > T::zero()) {
            return T::zero();
        }
        let (_, sq) = self.grid.clipped_moments(&curve);
        let jac = self.basis.jacobian();
        let v = self.unit_value(&beta, theta).unwrap_or(T::zero());
        jac * sq / (mass * mass) - T::lit(2.0) * jac * v / mass
    }
}
