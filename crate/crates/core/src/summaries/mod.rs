//! Summary statistics of raw datasets, their standardization, and
//! regression-based importance scores for statistic selection.

mod importance;
pub mod relevance;
mod standardize;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::RawDataset;
use crate::num::Real;

pub use importance::{importance, select_by_threshold, ImportanceScores};
pub use standardize::{standardize, Standardizer};

/// A summary statistic from the benchmark roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
    /// Mean of the first half of the observations (first `⌈n/2⌉` for odd `n`).
    Mean1,
    /// Mean of the second half of the observations (last `⌊n/2⌋` for odd `n`).
    Mean2,
    /// Standard deviation with the `1/n` normalization.
    Sd,
    Iqr,
    /// First quartile.
    Q1,
}

impl Statistic {
    pub const ALL: [Statistic; 7] = [
        Statistic::Mean,
        Statistic::Median,
        Statistic::Mean1,
        Statistic::Mean2,
        Statistic::Sd,
        Statistic::Iqr,
        Statistic::Q1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
            Statistic::Mean1 => "mean1",
            Statistic::Mean2 => "mean2",
            Statistic::Sd => "sd",
            Statistic::Iqr => "iqr",
            Statistic::Q1 => "q1",
        }
    }

    pub fn is_location(self) -> bool {
        matches!(
            self,
            Statistic::Mean | Statistic::Median | Statistic::Mean1 | Statistic::Mean2 | Statistic::Q1
        )
    }

    pub fn is_dispersion(self) -> bool {
        matches!(self, Statistic::Sd | Statistic::Iqr)
    }

    /// Evaluates the statistic on one column of observations.
    pub fn compute<T: Real>(self, xs: &[T]) -> T {
        let n = xs.len();
        let avg = |s: &[T]| s.iter().copied().sum::<T>() / T::from_count(s.len());
        match self {
            Statistic::Mean => avg(xs),
            Statistic::Mean1 => avg(&xs[..n.div_ceil(2)]),
            Statistic::Mean2 => {
                let start = n.div_ceil(2);
                if start == n {
                    avg(&xs[n - 1..])
                } else {
                    avg(&xs[start..])
                }
            }
            Statistic::Sd => {
                let m = avg(xs);
                (xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(n)).sqrt()
            }
            Statistic::Median | Statistic::Iqr | Statistic::Q1 => {
                let mut sorted = xs.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite observations"));
                match self {
                    Statistic::Median => quantile_sorted(&sorted, 0.5),
                    Statistic::Q1 => quantile_sorted(&sorted, 0.25),
                    _ => quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
                }
            }
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown summary statistic `{s}`")))
    }
}

/// Empirical quantile by linear interpolation of order statistics
/// (`h = (n - 1) p`, the "type 7" rule).
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Which statistics to compute and how many pure-noise coordinates to append.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySpec {
    roster: Vec<Statistic>,
    noise_count: usize,
}

impl SummarySpec {
    pub fn new(roster: Vec<Statistic>, noise_count: usize) -> Result<Self> {
        if roster.is_empty() && noise_count == 0 {
            return Err(Error::Config(
                "summary roster is empty and no noise statistics were requested".into(),
            ));
        }
        Ok(Self { roster, noise_count })
    }

    pub fn roster(&self) -> &[Statistic] {
        &self.roster
    }

    pub fn noise_count(&self) -> usize {
        self.noise_count
    }

    /// Number of summary coordinates for data with `data_dim` columns.
    pub fn len(&self, data_dim: usize) -> usize {
        self.roster.len() * data_dim + self.noise_count
    }

    pub fn is_empty(&self) -> bool {
        self.roster.is_empty() && self.noise_count == 0
    }

    /// Coordinate names, roster first (per data column), then noise.
    pub fn names(&self, data_dim: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len(data_dim));
        for st in &self.roster {
            if data_dim == 1 {
                names.push(st.name().to_string());
            } else {
                names.extend((1..=data_dim).map(|j| format!("{}[{j}]", st.name())));
            }
        }
        names.extend((1..=self.noise_count).map(|k| format!("noise{k}")));
        names
    }

    /// Appends the summaries of `data` to `out`.
    pub fn compute_into<T: Real, R: Rng + ?Sized>(&self, data: &RawDataset<T>, rng: &mut R, out: &mut Vec<T>) {
        if data.dim() == 1 {
            out.extend(self.roster.iter().map(|st| st.compute(data.values())));
        } else {
            let columns: Vec<Vec<T>> = (0..data.dim()).map(|j| data.column(j)).collect();
            for st in &self.roster {
                out.extend(columns.iter().map(|c| st.compute(c)));
            }
        }
        out.extend((0..self.noise_count).map(|_| T::standard_normal(rng)));
    }
}

/// Named vector of summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SummaryVector<T> {
    pub values: Vec<T>,
    pub names: Vec<String>,
}

impl<T: Real> SummaryVector<T> {
    pub fn new(values: Vec<T>, names: Vec<String>) -> Result<Self> {
        if values.len() != names.len() {
            return Err(Error::Config(format!(
                "{} summary values for {} names",
                values.len(),
                names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("summary vector has non-finite entries".into()));
        }
        Ok(Self { values, names })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Computes the roster statistics of `data`, followed by `noise_count`
/// independent standard normal draws.
pub fn compute_summaries<T: Real, R: Rng + ?Sized>(
    data: &RawDataset<T>,
    spec: &SummarySpec,
    rng: &mut R,
) -> SummaryVector<T> {
    let mut values = Vec::with_capacity(spec.len(data.dim()));
    spec.compute_into(data, rng, &mut values);
    SummaryVector {
        values,
        names: spec.names(data.dim()),
    }
}
