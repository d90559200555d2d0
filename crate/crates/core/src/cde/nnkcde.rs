//! Nearest-neighbor kernel CDE: a Gaussian KDE over the θ values of the `k`
//! training points whose summaries are closest to `x`.

use serde::{Deserialize, Serialize};

use crate::abc::TrainingSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::num::{logspace, pairwise_sum, sample_sd, Real};
use crate::regression::KdTree;

use super::kernel::{convolution, gauss, self_convolution_at_zero};
use super::{ConditionalDensity, Tuning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnKcdeConfig {
    /// Candidate neighbor counts; values above the training size are dropped.
    pub k_grid: Vec<usize>,
    /// Explicit bandwidths. When absent, `h_grid_size` log-spaced values over
    /// `[h_lower, h_upper] ×` the training SD of θ are used.
    pub h_grid: Option<Vec<f64>>,
    pub h_grid_size: usize,
    pub h_lower: f64,
    pub h_upper: f64,
}

impl Default for NnKcdeConfig {
    fn default() -> Self {
        Self {
            k_grid: vec![5, 10, 20, 35, 50, 75, 100, 150, 200],
            h_grid: None,
            h_grid_size: 15,
            h_lower: 0.01,
            h_upper: 1.0,
        }
    }
}

impl NnKcdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::Config("NN-KCDE k_grid must hold positive values".into()));
        }
        match &self.h_grid {
            Some(h) if h.is_empty() || h.iter().any(|&v| !(v > 0.0)) => {
                Err(Error::Config("NN-KCDE h_grid must hold positive values".into()))
            }
            None if self.h_grid_size == 0 || !(self.h_lower > 0.0 && self.h_upper >= self.h_lower) => {
                Err(Error::Config("NN-KCDE bandwidth range is empty".into()))
            }
            _ => Ok(()),
        }
    }

    fn grids<T: Real>(&self, train: &TrainingSet<T>) -> Result<(Vec<usize>, Vec<T>)> {
        self.validate()?;
        let mut ks: Vec<usize> = self.k_grid.iter().copied().filter(|&k| k <= train.len()).collect();
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() {
            return Err(Error::Config(format!(
                "every k in the grid exceeds the training size {}",
                train.len()
            )));
        }
        let mut hs: Vec<T> = match &self.h_grid {
            Some(h) => h.iter().map(|&v| T::lit(v)).collect(),
            None => {
                let sd = sample_sd(&train.thetas);
                if !(sd > T::zero()) {
                    return Err(Error::DegenerateSample("θ sample has zero variance".into()));
                }
                logspace(sd * T::lit(self.h_lower), sd * T::lit(self.h_upper), self.h_grid_size)
            }
        };
        hs.sort_by(|a, b| a.partial_cmp(b).expect("finite bandwidths"));
        hs.dedup();
        Ok((ks, hs))
    }
}

/// Surrogate losses for every `(k, h)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LossGrid<T> {
    pub k_grid: Vec<usize>,
    pub h_grid: Vec<T>,
    /// Row per k, column per h.
    pub values: Matrix<T>,
}

impl<T: Real> LossGrid<T> {
    /// Minimizing cell; ties go to the smallest k, then the smallest h.
    pub fn argmin(&self) -> (usize, T) {
        let mut best = (0, 0);
        for a in 0..self.k_grid.len() {
            for b in 0..self.h_grid.len() {
                if self.values.get(a, b) < self.values.get(best.0, best.1) {
                    best = (a, b);
                }
            }
        }
        (self.k_grid[best.0], self.h_grid[best.1])
    }
}

#[derive(Debug, Clone)]
pub struct NnKcde<T> {
    tree: KdTree<T>,
    thetas: Vec<T>,
    k: usize,
    h: T,
    losses: Option<LossGrid<T>>,
}

impl<T: Real> NnKcde<T> {
    pub fn with_params(train: &TrainingSet<T>, k: usize, h: T) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::Config(format!("k = {k} outside 1..={}", train.len())));
        }
        if !(h > T::zero()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self {
            tree: KdTree::new(train.covariates.clone()),
            thetas: train.thetas.clone(),
            k,
            h,
            losses: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bandwidth(&self) -> T {
        self.h
    }

    pub fn loss_grid(&self) -> Option<&LossGrid<T>> {
        self.losses.as_ref()
    }

    fn neighbor_thetas(&self, x: &[T], k: usize) -> Vec<T> {
        self.tree.nearest(x, k).iter().map(|n| self.thetas[n.index]).collect()
    }

    fn kde_at(nb: &[T], theta: T, h: T) -> T {
        nb.iter().fold(T::zero(), |acc, &t| acc + gauss((theta - t) / h)) / (T::from_count(nb.len()) * h)
    }

    fn squared_integral_of(nb: &[T], h: T) -> T {
        let mut acc = T::zero();
        for (a, &ta) in nb.iter().enumerate() {
            acc = acc + convolution(T::zero(), h);
            for &tb in &nb[a + 1..] {
                acc = acc + T::lit(2.0) * convolution(ta - tb, h);
            }
        }
        acc / T::from_count(nb.len() * nb.len())
    }

    /// Surrogate losses on `validation` for every grid cell, reusing the
    /// neighbor sums of `k₁` when extending to `k₂ > k₁`.
    pub fn nested_loss_grid(
        train: &TrainingSet<T>,
        validation: &TrainingSet<T>,
        k_grid: &[usize],
        h_grid: &[T],
    ) -> Result<LossGrid<T>> {
        let k_max = *k_grid
            .iter()
            .max()
            .ok_or_else(|| Error::Config("empty k_grid".into()))?;
        if k_max > train.len() || k_grid.contains(&0) {
            return Err(Error::Config(format!("k_grid exceeds training size {}", train.len())));
        }
        if h_grid.is_empty() {
            return Err(Error::Config("empty h_grid".into()));
        }
        if validation.dim() != train.dim() {
            return Err(Error::Config(
                "validation and training covariates differ in dimension".into(),
            ));
        }
        let tree = KdTree::new(train.covariates.clone());
        let c0 = self_convolution_at_zero::<T>();
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let mut wanted = vec![usize::MAX; k_max + 1];
        for (a, &k) in k_grid.iter().enumerate() {
            wanted[k] = a;
        }
        // terms[a][b] holds W for every validation point
        let mut terms = vec![vec![Vec::with_capacity(validation.len()); h_grid.len()]; k_grid.len()];
        for (x, &theta) in validation.covariates.iter_rows().zip(&validation.thetas) {
            let nb: Vec<T> = tree.nearest(x, k_max).iter().map(|n| train.thetas[n.index]).collect();
            for (b, &h) in h_grid.iter().enumerate() {
                let inv = T::one() / (four * h * h);
                let mut pair_sum = T::zero();
                let mut dens_sum = T::zero();
                for m in 0..k_max {
                    let tm = nb[m];
                    let mut cross = T::zero();
                    for &ta in &nb[..m] {
                        let d = ta - tm;
                        cross = cross + (-(d * d) * inv).exp();
                    }
                    pair_sum = pair_sum + T::one() + two * cross;
                    dens_sum = dens_sum + gauss((theta - tm) / h);
                    let a = wanted[m + 1];
                    if a != usize::MAX {
                        let k = T::from_count(m + 1);
                        let w = c0 * pair_sum / (k * k * h) - two * dens_sum / (k * h);
                        terms[a][b].push(w);
                    }
                }
            }
        }
        let mut values = Matrix::zeros(k_grid.len(), h_grid.len());
        for (a, row) in terms.iter().enumerate() {
            for (b, w) in row.iter().enumerate() {
                values.set(a, b, pairwise_sum(w) / T::from_count(w.len()));
            }
        }
        Ok(LossGrid {
            k_grid: k_grid.to_vec(),
            h_grid: h_grid.to_vec(),
            values,
        })
    }
}

/// Tunes `(k, h)` by surrogate loss on `validation`.
pub fn fit_nnkcde<T: Real>(
    train: &TrainingSet<T>,
    validation: &TrainingSet<T>,
    cfg: &NnKcdeConfig,
) -> Result<NnKcde<T>> {
    let (ks, hs) = cfg.grids(train)?;
    let grid = NnKcde::nested_loss_grid(train, validation, &ks, &hs)?;
    let (k, h) = grid.argmin();
    let mut est = NnKcde::with_params(train, k, h)?;
    est.losses = Some(grid);
    Ok(est)
}

impl<T: Real> ConditionalDensity<T> for NnKcde<T> {
    fn kind(&self) -> &str {
        "nn_kcde"
    }

    fn tuning(&self) -> Tuning {
        Tuning::from([("k".to_string(), self.k as f64), ("h".to_string(), self.h.as_f64())])
    }

    fn density(&self, theta: T, x: &[T]) -> T {
        Self::kde_at(&self.neighbor_thetas(x, self.k), theta, self.h)
    }

    fn squared_integral(&self, x: &[T]) -> T {
        Self::squared_integral_of(&self.neighbor_thetas(x, self.k), self.h)
    }

    fn density_curve(&self, thetas: &[T], x: &[T]) -> Vec<T> {
        let nb = self.neighbor_thetas(x, self.k);
        thetas.iter().map(|&t| Self::kde_at(&nb, t, self.h)).collect()
    }

    fn loss_term(&self, theta: T, x: &[T]) -> T {
        let nb = self.neighbor_thetas(x, self.k);
        Self::squared_integral_of(&nb, self.h) - T::lit(2.0) * Self::kde_at(&nb, theta, self.h)
    }
}
