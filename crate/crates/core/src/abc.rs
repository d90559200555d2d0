//! Rejection ABC: simulate from the prior predictive, keep the proposals whose
//! standardized summaries fall closest to the observed ones.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::linalg::Matrix;
use crate::models::{BenchmarkModel, RawDataset};
use crate::num::Real;
use crate::rng::{child_stream, derive_seed};
use crate::summaries::{compute_summaries, Standardizer, SummarySpec, SummaryVector};

pub const DEFAULT_PROPOSAL_CAP: usize = 10_000_000;
const CHUNK: usize = 4096;

/// Euclidean distance between standardized summaries, optionally restricted
/// to a subset of coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceFn {
    coordinates: Option<Vec<usize>>,
}

impl DistanceFn {
    pub fn euclidean() -> Self {
        Self { coordinates: None }
    }

    pub fn on_coordinates(coordinates: Vec<usize>) -> Result<Self> {
        if coordinates.is_empty() {
            return Err(Error::Config("distance needs at least one coordinate".into()));
        }
        Ok(Self {
            coordinates: Some(coordinates),
        })
    }

    /// Restricts the distance to the summaries with the given names.
    pub fn on_names(names: &[String], wanted: &[String]) -> Result<Self> {
        let coords = wanted
            .iter()
            .map(|w| {
                names
                    .iter()
                    .position(|n| n == w)
                    .ok_or_else(|| Error::Config(format!("distance statistic `{w}` is not in the roster")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::on_coordinates(coords)
    }

    pub fn coordinates(&self) -> Option<&[usize]> {
        self.coordinates.as_deref()
    }

    fn check(&self, dim: usize) -> Result<()> {
        match &self.coordinates {
            Some(c) if c.iter().any(|&j| j >= dim) => Err(Error::Config(format!(
                "distance coordinate out of range for {dim} summaries"
            ))),
            _ => Ok(()),
        }
    }

    pub fn distance<T: Real>(&self, a: &[T], b: &[T]) -> T {
        let sq = match &self.coordinates {
            None => a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)),
            Some(c) => c.iter().fold(T::zero(), |acc, &j| acc + (a[j] - b[j]) * (a[j] - b[j])),
        };
        sq.sqrt()
    }
}

/// How many pairs to accept and by which rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", bound = "T: Real")]
pub enum SamplingTarget<T> {
    /// Draw `⌈b / rate⌉` proposals and keep the `b` nearest.
    Rate { rate: f64, b: usize },
    /// Stream proposals and keep those with distance strictly below `epsilon` until `b` are found.
    Epsilon { epsilon: T, b: usize },
}

impl<T: Real> SamplingTarget<T> {
    pub fn from_parts(rate: Option<f64>, epsilon: Option<T>, b: usize) -> Result<Self> {
        let t = match (rate, epsilon) {
            (Some(rate), None) => SamplingTarget::Rate { rate, b },
            (None, Some(epsilon)) => SamplingTarget::Epsilon { epsilon, b },
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either an acceptance rate or a tolerance, not both".into(),
                ))
            }
            (None, None) => return Err(Error::Config("an acceptance rate or a tolerance is required".into())),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingTarget::Rate { rate, b } => {
                if b == 0 || !(rate > 0.0 && rate <= 1.0) {
                    return Err(Error::Config(format!(
                        "rate target needs B >= 1 and rate in (0, 1], got B = {b}, rate = {rate}"
                    )));
                }
            }
            SamplingTarget::Epsilon { epsilon, b } => {
                if b == 0 || !(epsilon > T::zero()) {
                    return Err(Error::Config(format!(
                        "tolerance target needs B >= 1 and epsilon > 0, got B = {b}, epsilon = {epsilon}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn accepted(&self) -> usize {
        match *self {
            SamplingTarget::Rate { b, .. } | SamplingTarget::Epsilon { b, .. } => b,
        }
    }
}

/// Number of proposals drawn for a rate target: `⌈b / rate⌉`.
pub fn pool_size(rate: f64, b: usize) -> usize {
    let raw = b as f64 / rate;
    // absorb representation error in the rate, e.g. 1000 / 0.01
    let near = raw.round();
    if (raw - near).abs() <= 1e-9 * raw {
        near as usize
    } else {
        raw.ceil() as usize
    }
}

/// Prior-predictive simulator producing (target θ, summary vector) pairs.
#[derive(Debug, Clone)]
pub struct Simulator<'a, T> {
    pub model: &'a BenchmarkModel<T>,
    pub summaries: &'a SummarySpec,
}

impl<T: Real> Simulator<'_, T> {
    pub fn summary_names(&self) -> Vec<String> {
        self.summaries.names(self.model.data_dim())
    }

    pub fn summary_dim(&self) -> usize {
        self.summaries.len(self.model.data_dim())
    }

    /// Summaries of an observed dataset; noise coordinates come from `seed`.
    pub fn observe(&self, data: &RawDataset<T>, seed: u64) -> SummaryVector<T> {
        compute_summaries(data, self.summaries, &mut child_stream(seed, u64::MAX))
    }

    /// Proposals `[start, start + len)` of the stream keyed by `seed`. Chunk
    /// `c` always uses the stream `child(seed, c)`, so any range is reproducible.
    fn chunk(&self, seed: u64, chunk: usize, len: usize) -> Result<(Vec<T>, Vec<T>)> {
        let mut rng = child_stream(seed, chunk as u64);
        let d = self.summary_dim();
        let mut thetas = Vec::with_capacity(len);
        let mut xs = Vec::with_capacity(len * d);
        for _ in 0..len {
            let theta = self.model.sample_prior(&mut rng);
            let data = self.model.simulate(&theta, &mut rng)?;
            thetas.push(self.model.target(&theta));
            self.summaries.compute_into(&data, &mut rng, &mut xs);
        }
        Ok((thetas, xs))
    }

    /// The first `n` proposals of the stream keyed by `seed`.
    pub fn pool(&self, n: usize, seed: u64) -> Result<(Vec<T>, Matrix<T>)> {
        self.chunks(0, n.div_ceil(CHUNK), n, seed)
    }

    fn chunks(&self, first: usize, count: usize, total: usize, seed: u64) -> Result<(Vec<T>, Matrix<T>)> {
        let parts = (first..first + count)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(total.saturating_sub(c * CHUNK));
                self.chunk(seed, c, len)
            })
            .collect::<Result<Vec<_>>>()?;
        let d = self.summary_dim();
        let mut thetas = Vec::new();
        let mut xs = Vec::new();
        for (t, x) in parts {
            thetas.extend(t);
            xs.extend(x);
        }
        Ok((thetas, Matrix::from_row_major(xs, d)))
    }
}

/// Accepted (θ, x) pairs with the metadata of the run that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainingSet<T> {
    pub thetas: Vec<T>,
    /// Raw summary vectors, one row per pair.
    pub summaries: Matrix<T>,
    /// Standardized summary vectors (the CDE covariates).
    pub covariates: Matrix<T>,
    pub names: Vec<String>,
    /// Raw observed summaries.
    pub observed_raw: Vec<T>,
    /// Standardized observed summaries.
    pub observed: Vec<T>,
    pub distances: Vec<T>,
    /// Tolerance in effect; `+∞` when nothing was rejected.
    pub epsilon: T,
    pub acceptance_rate: f64,
    pub n_proposed: usize,
    pub standardizer: Standardizer<T>,
    pub distance: DistanceFn,
    pub seed: u64,
    pub warnings: Vec<Warning>,
}

/// Sidecar record stored next to a training-set CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct TrainingMetadata<T> {
    pub names: Vec<String>,
    /// `None` encodes an infinite tolerance.
    pub epsilon: Option<T>,
    pub acceptance_rate: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub n_proposed: usize,
    pub seed: u64,
    pub observed: Vec<T>,
    pub standardizer: Standardizer<T>,
    pub distance: DistanceFn,
    pub warnings: Vec<Warning>,
}

impl<T: Real> TrainingSet<T> {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            thetas: indices.iter().map(|&i| self.thetas[i]).collect(),
            summaries: self.summaries.select_rows(indices),
            covariates: self.covariates.select_rows(indices),
            distances: indices.iter().map(|&i| self.distances[i]).collect(),
            ..self.clone_meta()
        }
    }

    /// Same data with the covariates restricted to the given coordinates.
    pub fn select_coordinates(&self, coords: &[usize]) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|&j| j >= self.dim()) {
            return Err(Error::Config("coordinate selection out of range".into()));
        }
        let pick = |m: &Matrix<T>| {
            let data = m.iter_rows().flat_map(|r| coords.iter().map(move |&j| r[j])).collect();
            Matrix::from_row_major(data, coords.len())
        };
        let pick_vec = |v: &[T]| coords.iter().map(|&j| v[j]).collect::<Vec<T>>();
        let standardizer = Standardizer::from_parts(
            pick_vec(self.standardizer.center()),
            pick_vec(self.standardizer.scale()),
        )?;
        Ok(Self {
            thetas: self.thetas.clone(),
            summaries: pick(&self.summaries),
            covariates: pick(&self.covariates),
            names: coords.iter().map(|&j| self.names[j].clone()).collect(),
            observed_raw: pick_vec(&self.observed_raw),
            observed: pick_vec(&self.observed),
            distances: self.distances.clone(),
            epsilon: self.epsilon,
            acceptance_rate: self.acceptance_rate,
            n_proposed: self.n_proposed,
            standardizer,
            distance: self.distance.clone(),
            seed: self.seed,
            warnings: self.warnings.clone(),
        })
    }

    fn clone_meta(&self) -> Self {
        Self {
            thetas: Vec::new(),
            summaries: Matrix::zeros(0, self.summaries.cols()),
            covariates: Matrix::zeros(0, self.covariates.cols()),
            names: self.names.clone(),
            observed_raw: self.observed_raw.clone(),
            observed: self.observed.clone(),
            distances: Vec::new(),
            epsilon: self.epsilon,
            acceptance_rate: self.acceptance_rate,
            n_proposed: self.n_proposed,
            standardizer: self.standardizer.clone(),
            distance: self.distance.clone(),
            seed: self.seed,
            warnings: self.warnings.clone(),
        }
    }

    pub fn metadata(&self) -> TrainingMetadata<T> {
        TrainingMetadata {
            names: self.names.clone(),
            epsilon: self.epsilon.is_finite().then_some(self.epsilon),
            acceptance_rate: self.acceptance_rate,
            b: self.len(),
            n_proposed: self.n_proposed,
            seed: self.seed,
            observed: self.observed_raw.clone(),
            standardizer: self.standardizer.clone(),
            distance: self.distance.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Writes `theta, x_1, …, x_d` rows of raw summaries.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Config(format!("writing training set: {e}"));
        let mut header = vec!["theta".to_string()];
        header.extend((1..=self.summaries.cols()).map(|j| format!("x_{j}")));
        wtr.write_record(&header).map_err(io)?;
        for (t, row) in self.thetas.iter().zip(self.summaries.iter_rows()) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec).map_err(io)?;
        }
        wtr.flush()
            .map_err(|e| Error::Config(format!("writing training set: {e}")))
    }

    /// Rebuilds a training set from its CSV rows and sidecar metadata.
    /// Covariates and distances are recomputed with the stored transform.
    pub fn read_csv<R: Read>(r: R, meta: TrainingMetadata<T>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let bad = |m: String| Error::Config(format!("reading training set: {m}"));
        let d = meta.names.len();
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.len() != d + 1 || &headers[0] != "theta" {
            return Err(bad(format!("expected theta and {d} summary columns")));
        }
        let mut thetas = Vec::new();
        let mut xs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let mut vals = rec.iter().map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| bad(format!("`{f}`: {e}")))
            });
            thetas.push(vals.next().ok_or_else(|| bad("empty row".into()))??);
            for v in vals {
                xs.push(v?);
            }
        }
        if thetas.len() != meta.b {
            return Err(bad(format!(
                "metadata says B = {}, file has {} rows",
                meta.b,
                thetas.len()
            )));
        }
        let summaries = Matrix::from_row_major(xs, d);
        let covariates = meta.standardizer.apply_rows(&summaries);
        let observed = meta.standardizer.apply(&meta.observed);
        let distances = covariates
            .iter_rows()
            .map(|r| meta.distance.distance(r, &observed))
            .collect();
        Ok(Self {
            thetas,
            summaries,
            covariates,
            names: meta.names,
            observed_raw: meta.observed,
            observed,
            distances,
            epsilon: meta.epsilon.unwrap_or_else(T::infinity),
            acceptance_rate: meta.acceptance_rate,
            n_proposed: meta.n_proposed,
            standardizer: meta.standardizer,
            distance: meta.distance,
            seed: meta.seed,
            warnings: meta.warnings,
        })
    }
}

/// Rejection sampler with a bounded proposal budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectionSampler {
    pub proposal_cap: usize,
    /// Proposals used to fit the standardizer in tolerance mode.
    pub pilot_size: usize,
}

impl Default for RejectionSampler {
    fn default() -> Self {
        Self {
            proposal_cap: DEFAULT_PROPOSAL_CAP,
            pilot_size: 10_000,
        }
    }
}

impl RejectionSampler {
    pub fn sample<T: Real>(
        &self,
        sim: &Simulator<'_, T>,
        observed: &SummaryVector<T>,
        distance: &DistanceFn,
        target: SamplingTarget<T>,
        seed: u64,
    ) -> Result<TrainingSet<T>> {
        target.validate()?;
        let d = sim.summary_dim();
        if observed.len() != d {
            return Err(Error::Config(format!(
                "observed summaries have {} coordinates, simulator produces {d}",
                observed.len()
            )));
        }
        distance.check(d)?;
        let names = sim.summary_names();
        let proposal_seed = derive_seed(seed, 0);
        match target {
            SamplingTarget::Rate { rate, b } => {
                let n = pool_size(rate, b);
                if n > self.proposal_cap {
                    return Err(Error::BudgetExhausted {
                        cap: self.proposal_cap,
                        accepted: 0,
                        target: b,
                    });
                }
                let (thetas, raw) = sim.pool(n, proposal_seed)?;
                let standardizer = Standardizer::fit(&raw)?;
                let z = standardizer.apply_rows(&raw);
                let obs = standardizer.apply(&observed.values);
                let dist: Vec<T> = z.iter_rows().map(|r| distance.distance(r, &obs)).collect();
                let mut order: Vec<usize> = (0..n).collect();
                let cmp =
                    |&a: &usize, &b: &usize| dist[a].partial_cmp(&dist[b]).expect("finite distances").then(a.cmp(&b));
                let epsilon = if b < n {
                    order.select_nth_unstable_by(b - 1, cmp);
                    dist[order[b - 1]]
                } else {
                    T::infinity()
                };
                let mut keep = order[..b].to_vec();
                keep.sort_unstable();
                let warnings = standardizer.warnings(&names);
                Ok(TrainingSet {
                    thetas: keep.iter().map(|&i| thetas[i]).collect(),
                    summaries: raw.select_rows(&keep),
                    covariates: z.select_rows(&keep),
                    names,
                    observed_raw: observed.values.clone(),
                    observed: obs,
                    distances: keep.iter().map(|&i| dist[i]).collect(),
                    epsilon,
                    acceptance_rate: rate,
                    n_proposed: n,
                    standardizer,
                    distance: distance.clone(),
                    seed,
                    warnings,
                })
            }
            SamplingTarget::Epsilon { epsilon, b } => {
                let pilot_n = self.pilot_size.clamp(2, self.proposal_cap.max(2));
                let (_, pilot) = sim.pool(pilot_n, derive_seed(seed, 1))?;
                let standardizer = Standardizer::fit(&pilot)?;
                let obs = standardizer.apply(&observed.values);
                let batch = rayon::current_num_threads().max(1) * 2;
                let mut thetas = Vec::with_capacity(b);
                let mut summaries = Vec::with_capacity(b * d);
                let mut covs = Vec::with_capacity(b * d);
                let mut dists = Vec::with_capacity(b);
                let mut proposed = 0usize;
                let mut next_chunk = 0usize;
                while thetas.len() < b {
                    if proposed >= self.proposal_cap {
                        return Err(Error::BudgetExhausted {
                            cap: self.proposal_cap,
                            accepted: thetas.len(),
                            target: b,
                        });
                    }
                    let (t, raw) = sim.chunks(next_chunk, batch, (next_chunk + batch) * CHUNK, proposal_seed)?;
                    next_chunk += batch;
                    for (i, row) in raw.iter_rows().enumerate() {
                        if proposed >= self.proposal_cap || thetas.len() == b {
                            break;
                        }
                        proposed += 1;
                        let z = standardizer.apply(row);
                        let dz = distance.distance(&z, &obs);
                        if dz < epsilon {
                            thetas.push(t[i]);
                            summaries.extend_from_slice(row);
                            covs.extend(z);
                            dists.push(dz);
                        }
                    }
                }
                let warnings = standardizer.warnings(&names);
                Ok(TrainingSet {
                    thetas,
                    summaries: Matrix::from_row_major(summaries, d),
                    covariates: Matrix::from_row_major(covs, d),
                    names,
                    observed_raw: observed.values.clone(),
                    observed: obs,
                    distances: dists,
                    epsilon,
                    acceptance_rate: b as f64 / proposed as f64,
                    n_proposed: proposed,
                    standardizer,
                    distance: distance.clone(),
                    seed,
                    warnings,
                })
            }
        }
    }
}

/// Random disjoint split; `fraction` is the share assigned to validation.
pub fn split_train_validation<T: Real>(
    set: &TrainingSet<T>,
    fraction: f64,
    seed: u64,
) -> Result<(TrainingSet<T>, TrainingSet<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("validation fraction {fraction} outside (0, 1)")));
    }
    let n = set.len();
    let n_val = (n as f64 * fraction).round() as usize;
    if n_val < 2 || n - n_val < 2 {
        return Err(Error::Config(format!(
            "splitting {n} pairs at fraction {fraction} leaves a part with fewer than 2 pairs"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut child_stream(seed, 0x5EED));
    let (val, train) = idx.split_at_mut(n_val);
    val.sort_unstable();
    train.sort_unstable();
    Ok((set.subset(train), set.subset(val)))
}
