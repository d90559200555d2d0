//! Stored training sets and fits used by the single-step subcommands.
//!
//! A set directory holds `train.csv`/`train.json`, `validation.csv`/`validation.json`
//! and `context.json`; fits live in `fits/<label>.json`.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use abc_cde::cde::{EvalGrid, Tuning};
use abc_cde::{
    compare_pair, select, surrogate_loss, true_ise, BenchmarkModel, ConditionalDensity, EstimatorSpec, LossReport,
    RawDataset, RegressionMethod, TrainingMetadata, TrainingSet, Warning,
};
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use crate::bundle::LOSS_HEADER;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetContext {
    pub version: String,
    pub replicate: usize,
    pub seed: u64,
    pub target: String,
    pub model: BenchmarkModel,
    pub data: RawDataset<f64>,
}

pub struct StoredSet {
    pub context: SetContext,
    pub train: TrainingSet,
    pub validation: TrainingSet,
}

fn write_part(dir: &Path, name: &str, set: &TrainingSet) -> Result<()> {
    set.write_csv(File::create(dir.join(format!("{name}.csv")))?)?;
    fs::write(
        dir.join(format!("{name}.json")),
        serde_json::to_vec_pretty(&set.metadata())?,
    )?;
    Ok(())
}

fn read_part(dir: &Path, name: &str) -> Result<TrainingSet> {
    let meta_path = dir.join(format!("{name}.json"));
    let meta: TrainingMetadata<f64> = serde_json::from_reader(BufReader::new(
        File::open(&meta_path).with_context(|| format!("opening {}", meta_path.display()))?,
    ))
    .with_context(|| format!("parsing {}", meta_path.display()))?;
    let csv_path = dir.join(format!("{name}.csv"));
    Ok(TrainingSet::read_csv(
        File::open(&csv_path).with_context(|| format!("opening {}", csv_path.display()))?,
        meta,
    )?)
}

impl StoredSet {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_part(dir, "train", &self.train)?;
        write_part(dir, "validation", &self.validation)?;
        fs::write(dir.join("context.json"), serde_json::to_vec_pretty(&self.context)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let ctx_path = dir.join("context.json");
        let context = serde_json::from_reader(BufReader::new(
            File::open(&ctx_path).with_context(|| format!("opening {}", ctx_path.display()))?,
        ))
        .with_context(|| format!("parsing {}", ctx_path.display()))?;
        Ok(Self {
            context,
            train: read_part(dir, "train")?,
            validation: read_part(dir, "validation")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub label: String,
    pub estimator: EstimatorSpec,
    pub seed: u64,
    pub tuning: Tuning,
    pub surrogate: LossReport,
    pub warnings: Vec<Warning>,
}

impl FitRecord {
    /// Fits are deterministic in (set, spec, seed), so a stored record is
    /// turned back into an estimate by refitting.
    pub fn refit(&self, set: &StoredSet) -> Result<Box<dyn ConditionalDensity<f64>>> {
        let fit = self.estimator.fit(&set.train, &set.validation, self.seed)?;
        ensure!(
            fit.tuning() == self.tuning,
            "refitting {} gave different tuning; the set changed since it was fit",
            self.label
        );
        Ok(fit)
    }
}

pub fn fit(set: &StoredSet, estimator: EstimatorSpec, seed: u64) -> Result<(FitRecord, Vec<f64>, Vec<f64>)> {
    estimator.validate()?;
    let est = estimator.fit(&set.train, &set.validation, seed)?;
    let surrogate = surrogate_loss(est.as_ref(), &set.validation)?;
    let grid = EvalGrid::covering(&set.train.thetas, None)?;
    let thetas = grid.points().to_vec();
    let curve = est.density_curve(&thetas, &set.train.observed);
    Ok((
        FitRecord {
            label: estimator.label(),
            seed,
            tuning: est.tuning(),
            warnings: est.warnings(),
            surrogate,
            estimator,
        },
        thetas,
        curve,
    ))
}

pub fn write_curve(path: &Path, thetas: &[f64], density: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "density"])?;
    for (t, d) in thetas.iter().zip(density) {
        w.write_record([t.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fits(dir: &Path) -> Result<Vec<FitRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let fits = paths
        .iter()
        .map(|p| -> Result<FitRecord> {
            Ok(serde_json::from_reader(BufReader::new(File::open(p)?))
                .with_context(|| format!("parsing {}", p.display()))?)
        })
        .collect::<Result<Vec<_>>>()?;
    if fits.is_empty() {
        bail!("no fits found in {}", dir.display());
    }
    Ok(fits)
}

/// Surrogate and true losses for every stored fit, in the run's loss-table layout.
pub fn evaluate(set: &StoredSet, fits: &[FitRecord], out: &Path) -> Result<()> {
    let oracle = set.context.model.true_posterior(&set.context.data)?;
    let grid = EvalGrid::covering(&set.train.thetas, Some(oracle.support()))?;
    let mut w = csv::Writer::from_path(out)?;
    let mut h = vec!["replicate", "seed", "target"];
    h.extend(LOSS_HEADER);
    w.write_record(&h)?;
    let eps = if set.train.epsilon.is_finite() {
        set.train.epsilon.to_string()
    } else {
        "inf".into()
    };
    for f in fits {
        let est = f.refit(set)?;
        let r = surrogate_loss(est.as_ref(), &set.validation)?;
        let ise = true_ise(est.as_ref(), &set.train.observed, &oracle, &grid)?;
        w.write_record([
            set.context.replicate.to_string(),
            set.context.seed.to_string(),
            set.context.target.clone(),
            f.label.clone(),
            r.value.to_string(),
            r.se.to_string(),
            ise.to_string(),
            set.train.acceptance_rate.to_string(),
            set.train.len().to_string(),
            set.validation.len().to_string(),
            eps.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Surrogate-loss selection over stored fits plus paired comparisons of each
/// fit against the selected one.
pub fn select_fits(set: &StoredSet, fits: &[FitRecord], confidence: f64, out: &Path) -> Result<String> {
    let ests = fits.iter().map(|f| f.refit(set)).collect::<Result<Vec<_>>>()?;
    let reports = ests
        .iter()
        .map(|e| surrogate_loss(e.as_ref(), &set.validation))
        .collect::<abc_cde::Result<Vec<_>>>()?;
    let best = select(&reports).context("every surrogate loss is NaN")?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record([
        "estimator",
        "surrogate_value",
        "surrogate_se",
        "selected",
        "delta",
        "se",
        "ci_low",
        "ci_high",
        "decision",
    ])?;
    for (i, (f, r)) in fits.iter().zip(&reports).enumerate() {
        let mut row = vec![
            f.label.clone(),
            r.value.to_string(),
            r.se.to_string(),
            (i == best).to_string(),
        ];
        if i == best {
            row.extend(std::iter::repeat_n(String::new(), 5));
        } else {
            let c = compare_pair(ests[i].as_ref(), ests[best].as_ref(), &set.validation, confidence)?;
            row.extend([
                c.delta.to_string(),
                c.se.to_string(),
                c.ci.0.to_string(),
                c.ci.1.to_string(),
                serde_json::to_value(c.decision)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(fits[best].label.clone())
}

/// Importance table with columns `statistic, u, u_1 … u_I`.
pub fn importance_table(
    set: &StoredSet,
    cutoff: usize,
    method: &RegressionMethod,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let s = abc_cde::importance(&set.train, cutoff, method, seed)?;
    let mut w = csv::Writer::from_path(out)?;
    let mut h = vec!["statistic".to_string(), "u".to_string()];
    h.extend((1..=s.breakdown.rows()).map(|i| format!("u_{i}")));
    w.write_record(&h)?;
    for (j, name) in s.names.iter().enumerate() {
        let mut row = vec![name.clone(), s.u[j].to_string()];
        row.extend((0..s.breakdown.rows()).map(|i| s.breakdown.get(i, j).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
