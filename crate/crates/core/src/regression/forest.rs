//! Random forest regression on quantile-binned covariates.
//!
//! Each output column gets its own ensemble. Split search works on at most
//! `n_bins` quantile bins per covariate. Importances are the mean decrease
//! in squared error per covariate, normalized by the number of trees and
//! the training size (so they are in units of MSE).

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::num::Real;
use crate::rng::{derive_path, stream};

use super::Regressor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    pub max_depth: usize,
    /// Covariates tried per split; `None` means `max(1, d / 3)`.
    pub mtry: Option<usize>,
    pub n_bins: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_samples_leaf: 5,
            max_depth: 24,
            mtry: None,
            n_bins: 64,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_samples_leaf == 0 || self.max_depth == 0 {
            return Err(Error::Config(
                "tree ensemble needs positive n_trees, min_samples_leaf and max_depth".into(),
            ));
        }
        if !(2..=256).contains(&self.n_bins) {
            return Err(Error::Config(format!("n_bins = {} outside 2..=256", self.n_bins)));
        }
        if self.mtry == Some(0) {
            return Err(Error::Config("mtry must be positive".into()));
        }
        Ok(())
    }
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node<T> {
    feature: u32,
    /// Split threshold (`x <= value` goes left) or leaf prediction.
    value: T,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tree<T> {
    fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.value {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }
}

/// Covariates mapped to quantile bins, stored column-major.
struct Binned<T> {
    codes: Vec<u8>,
    thresholds: Vec<Vec<T>>,
    n: usize,
}

impl<T: Real> Binned<T> {
    fn new(x: &Matrix<T>, n_bins: usize) -> Self {
        let n = x.rows();
        let mut codes = vec![0u8; n * x.cols()];
        let mut thresholds = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let col = x.column(j);
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite covariates"));
            sorted.dedup();
            // the last distinct value needs no threshold: everything is <= it
            let thr: Vec<T> = if sorted.len() <= n_bins {
                sorted[..sorted.len() - 1].to_vec()
            } else {
                let mut t: Vec<T> = (1..n_bins).map(|b| sorted[b * (sorted.len() - 1) / n_bins]).collect();
                t.dedup();
                t
            };
            for (i, &v) in col.iter().enumerate() {
                codes[j * n + i] = thr.partition_point(|&t| t < v) as u8;
            }
            thresholds.push(thr);
        }
        Self { codes, thresholds, n }
    }

    #[inline]
    fn code(&self, i: usize, j: usize) -> usize {
        self.codes[j * self.n + i] as usize
    }
}

struct Grower<'a, T> {
    bins: &'a Binned<T>,
    y: &'a [T],
    params: &'a ForestParams,
    mtry: usize,
    importance: Vec<T>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Grower<'_, T> {
    fn grow<R: Rng>(&mut self, idx: &mut [u32], depth: usize, rng: &mut R) -> u32 {
        let id = self.nodes.len() as u32;
        let n = idx.len();
        let (sum, sumsq) = idx.iter().fold((T::zero(), T::zero()), |(s, q), &i| {
            let v = self.y[i as usize];
            (s + v, q + v * v)
        });
        let nn = T::from_count(n);
        let mean = sum / nn;
        self.nodes.push(Node {
            feature: LEAF,
            value: mean,
            left: 0,
            right: 0,
        });
        let sse = sumsq - sum * sum / nn;
        let min_leaf = self.params.min_samples_leaf;
        if depth >= self.params.max_depth || n < 2 * min_leaf || !(sse > T::lit(1e-12) * nn) {
            return id;
        }
        let d = self.bins.thresholds.len();
        let features = sample_indices(rng, d, self.mtry.min(d));
        let base = sum * sum / nn;
        let mut best: Option<(usize, usize, T)> = None;
        let mut counts = vec![0usize; 257];
        let mut sums = vec![T::zero(); 257];
        for j in features.iter() {
            let nthr = self.bins.thresholds[j].len();
            if nthr == 0 {
                continue;
            }
            counts[..=nthr].iter_mut().for_each(|c| *c = 0);
            sums[..=nthr].iter_mut().for_each(|s| *s = T::zero());
            for &i in idx.iter() {
                let b = self.bins.code(i as usize, j);
                counts[b] += 1;
                sums[b] = sums[b] + self.y[i as usize];
            }
            let (mut nl, mut sl) = (0usize, T::zero());
            for b in 0..nthr {
                nl += counts[b];
                sl = sl + sums[b];
                let nr = n - nl;
                if nl < min_leaf {
                    continue;
                }
                if nr < min_leaf {
                    break;
                }
                let sr = sum - sl;
                let gain = sl * sl / T::from_count(nl) + sr * sr / T::from_count(nr) - base;
                if best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((j, b, gain));
                }
            }
        }
        let Some((j, b, gain)) = best.filter(|&(_, _, g)| g > T::zero()) else {
            return id;
        };
        self.importance[j] = self.importance[j] + gain;
        // partition: codes <= b go left
        let mut lo = 0;
        for k in 0..n {
            if self.bins.code(idx[k] as usize, j) <= b {
                idx.swap(lo, k);
                lo += 1;
            }
        }
        let (left_idx, right_idx) = idx.split_at_mut(lo);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        let node = &mut self.nodes[id as usize];
        node.feature = j as u32;
        node.value = self.bins.thresholds[j][b];
        node.left = left;
        node.right = right;
        id
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest<T> {
    /// `forests[o]` is the ensemble for output `o`.
    forests: Vec<Vec<Tree<T>>>,
    importances: Matrix<T>,
}

impl<T: Real> RandomForest<T> {
    pub fn fit(x: &Matrix<T>, y: &Matrix<T>, params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        super::check_shapes(x, y)?;
        let n = x.rows();
        let d = x.cols();
        let bins = Binned::new(x, params.n_bins);
        let mtry = params.mtry.unwrap_or((d / 3).max(1));
        let outputs: Vec<Vec<T>> = (0..y.cols()).map(|o| y.column(o)).collect();
        let jobs: Vec<(usize, usize)> = (0..y.cols())
            .flat_map(|o| (0..params.n_trees).map(move |t| (o, t)))
            .collect();
        let grown: Vec<(Tree<T>, Vec<T>)> = jobs
            .par_iter()
            .map(|&(o, t)| {
                let mut rng = stream(derive_path(seed, &[o as u64, t as u64]));
                let mut idx: Vec<u32> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n) as u32).collect()
                } else {
                    (0..n as u32).collect()
                };
                let mut g = Grower {
                    bins: &bins,
                    y: &outputs[o],
                    params,
                    mtry,
                    importance: vec![T::zero(); d],
                    nodes: Vec::new(),
                };
                g.grow(&mut idx, 0, &mut rng);
                (Tree { nodes: g.nodes }, g.importance)
            })
            .collect();
        let mut forests: Vec<Vec<Tree<T>>> = (0..y.cols()).map(|_| Vec::new()).collect();
        let mut importances = Matrix::zeros(y.cols(), d);
        let norm = T::from_count(params.n_trees * n);
        // ordered reduce: accumulation order is fixed by (output, tree)
        for ((o, _), (tree, imp)) in jobs.into_iter().zip(grown) {
            forests[o].push(tree);
            for (j, v) in imp.into_iter().enumerate() {
                importances.set(o, j, importances.get(o, j) + v / norm);
            }
        }
        Ok(Self { forests, importances })
    }
}

impl<T: Real> Regressor<T> for RandomForest<T> {
    fn n_outputs(&self) -> usize {
        self.forests.len()
    }

    fn predict_into(&self, x: &[T], out: &mut [T]) {
        for (o, trees) in out.iter_mut().zip(&self.forests) {
            *o = trees.iter().map(|t| t.predict(x)).sum::<T>() / T::from_count(trees.len());
        }
    }

    fn importances(&self) -> Option<&Matrix<T>> {
        Some(&self.importances)
    }
}
