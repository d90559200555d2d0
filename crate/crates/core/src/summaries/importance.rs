use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::abc::TrainingSet;
use crate::cde::basis::FourierBasis;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::num::Real;
use crate::regression::RegressionMethod;

/// Per-statistic importances averaged over the first `cutoff` basis regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ImportanceScores<T> {
    pub names: Vec<String>,
    /// `u_j`, one per statistic.
    pub u: Vec<T>,
    /// `u_{i,j}`: row `i` is the regression of basis function `i + 1`.
    pub breakdown: Matrix<T>,
    pub cutoff: usize,
}

impl<T: Real> ImportanceScores<T> {
    /// Builds scores from a breakdown matrix, averaging each column in row order.
    pub fn from_breakdown(names: Vec<String>, breakdown: Matrix<T>) -> Result<Self> {
        if names.len() != breakdown.cols() || breakdown.rows() == 0 {
            return Err(Error::Config("importance breakdown does not match the roster".into()));
        }
        let cutoff = breakdown.rows();
        let u = (0..breakdown.cols())
            .map(|j| (0..cutoff).fold(T::zero(), |acc, i| acc + breakdown.get(i, j)) / T::from_count(cutoff))
            .collect();
        Ok(Self {
            names,
            u,
            breakdown,
            cutoff,
        })
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.u.iter().enumerate() {
            if v > self.u[best] {
                best = j;
            }
        }
        best
    }

    pub fn max(&self) -> T {
        self.u[self.argmax()]
    }

    /// CSV with columns `statistic, u_j, u_1_j, …, u_I_j`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Config(format!("writing importance table: {e}"));
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["statistic".to_string(), "u_j".to_string()];
        header.extend((1..=self.cutoff).map(|i| format!("u_{i}_j")));
        wtr.write_record(&header).map_err(io)?;
        for (j, name) in self.names.iter().enumerate() {
            let mut rec = vec![name.clone(), self.u[j].to_string()];
            rec.extend((0..self.cutoff).map(|i| self.breakdown.get(i, j).to_string()));
            wtr.write_record(&rec).map_err(io)?;
        }
        wtr.flush()
            .map_err(|e| Error::Config(format!("writing importance table: {e}")))
    }
}

/// Regresses each of the first `cutoff` Fourier basis functions of θ on the
/// covariates and averages the per-regression importances.
pub fn importance<T: Real>(
    train: &TrainingSet<T>,
    cutoff: usize,
    method: &RegressionMethod,
    seed: u64,
) -> Result<ImportanceScores<T>> {
    if cutoff == 0 {
        return Err(Error::Config("importance cutoff must be at least 1".into()));
    }
    if !method.provides_importances() {
        return Err(Error::MissingImportances(method.name().into()));
    }
    let basis = FourierBasis::from_sample(&train.thetas, cutoff)?;
    let mut y = Matrix::zeros(train.len(), cutoff);
    for (i, &t) in train.thetas.iter().enumerate() {
        basis.eval(t, y.row_mut(i));
    }
    let fitted = method.fit(&train.covariates, &y, seed)?;
    let breakdown = fitted
        .importances()
        .ok_or_else(|| Error::MissingImportances(method.name().into()))?
        .clone();
    ImportanceScores::from_breakdown(train.names.clone(), breakdown)
}

/// Names of the statistics with `u_j > t`, in roster order.
pub fn select_by_threshold<T: Real>(scores: &ImportanceScores<T>, t: T) -> Vec<String> {
    scores
        .names
        .iter()
        .zip(&scores.u)
        .filter(|(_, &u)| u > t)
        .map(|(n, _)| n.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(u_rows: Vec<Vec<f64>>) -> ImportanceScores<f64> {
        let d = u_rows[0].len();
        let names = (0..d).map(|j| format!("s{j}")).collect();
        ImportanceScores::from_breakdown(names, Matrix::from_rows(&u_rows)).unwrap()
    }

    #[test]
    fn threshold_edges() {
        let s = scores(vec![vec![0.1, 0.5, 0.3], vec![0.3, 0.7, 0.1]]);
        assert_eq!(select_by_threshold(&s, 0.0).len(), 3);
        assert!(select_by_threshold(&s, s.max()).is_empty());
        assert_eq!(select_by_threshold(&s, 0.2), vec!["s1".to_string()]);
    }

    #[test]
    fn csv_layout() {
        let s = scores(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "statistic,u_j,u_1_j,u_2_j\ns0,2,1,3\ns1,3,2,4\n"
        );
    }

    #[test]
    fn knn_has_no_importances() {
        let t: TrainingSet<f64> = tiny_training_set();
        let m = RegressionMethod::NearestNeighbors { k_grid: vec![3] };
        assert!(matches!(importance(&t, 3, &m, 0), Err(Error::MissingImportances(_))));
    }

    fn tiny_training_set() -> TrainingSet<f64> {
        use crate::abc::{DistanceFn, RejectionSampler, SamplingTarget, Simulator};
        use crate::models::BenchmarkModel;
        use crate::summaries::{Statistic, SummarySpec, SummaryVector};
        let m = BenchmarkModel::known_variance_mean(1.0, 4).unwrap();
        let s = SummarySpec::new(vec![Statistic::Mean], 1).unwrap();
        let sim = Simulator {
            model: &m,
            summaries: &s,
        };
        let o = SummaryVector::new(vec![0.0, 0.0], sim.summary_names()).unwrap();
        RejectionSampler::default()
            .sample(
                &sim,
                &o,
                &DistanceFn::euclidean(),
                SamplingTarget::Rate { rate: 1.0, b: 50 },
                0,
            )
            .unwrap()
    }

    proptest! {
        #[test]
        fn u_is_the_column_mean(rows in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 4), 1..12)) {
            let s = scores(rows.clone());
            for j in 0..4 {
                let mut acc = 0.0;
                for r in &rows {
                    acc += r[j];
                }
                prop_assert_eq!(s.u[j], acc / rows.len() as f64);
            }
        }

        #[test]
        fn median_threshold_keeps_strictly_larger(u in proptest::collection::vec(0.0f64..1.0, 1..20)) {
            let s = scores(vec![u.clone()]);
            let mut sorted = u.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = sorted[sorted.len() / 2];
            let want: Vec<String> = u.iter().enumerate().filter(|(_, &v)| v > med).map(|(j, _)| format!("s{j}")).collect();
            prop_assert_eq!(select_by_threshold(&s, med), want);
        }
    }
}
