//! One replicate: observe, sample, fit, score.

use abc_cde::cde::{EvalGrid, Tuning};
use abc_cde::rng::{child_stream, derive_path, derive_seed};
use abc_cde::{
    compare_pair, importance, select, surrogate_loss, true_ise, ConditionalDensity, Decision, LossReport,
    PosteriorOracle, RawDataset, RegressionMethod, Simulator, SummaryVector, TrainingSet, Warning,
};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{target_label, ObservedLaw, Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit {
    pub replicate: usize,
    pub observation: usize,
    pub seed: u64,
}

/// Replicate `r` of observation `o` has id `o * replicates + r`; its seed
/// depends only on the master seed and that id.
pub fn units(plan: &Plan, master: u64) -> Vec<Unit> {
    let per = plan.config.replicates;
    let observations = plan.config.observed.labels().len();
    (0..observations * per)
        .map(|id| Unit {
            replicate: id,
            observation: id / per,
            seed: derive_seed(master, id as u64),
        })
        .collect()
}

pub fn observed_dataset(plan: &Plan, unit: &Unit) -> Result<RawDataset<f64>> {
    Ok(match &plan.config.observed {
        ObservedLaw::StandardNormal => plan.model.standard_normal_dataset(&mut child_stream(unit.seed, 0)),
        ObservedLaw::Fixed { values } => {
            let dim = plan.model.data_dim();
            RawDataset::new(vec![values[unit.observation]; plan.model.n_obs() * dim], dim)?
        }
    })
}

pub struct Prepared {
    pub data: RawDataset<f64>,
    pub observed: SummaryVector,
    pub oracle: PosteriorOracle,
}

pub fn prepare(plan: &Plan, unit: &Unit) -> Result<Prepared> {
    let data = observed_dataset(plan, unit)?;
    let oracle = plan.model.true_posterior(&data).context("posterior oracle")?;
    let sim = simulator(plan);
    let observed = sim.observe(&data, derive_seed(unit.seed, 1));
    Ok(Prepared { data, observed, oracle })
}

fn simulator(plan: &Plan) -> Simulator<'_, f64> {
    Simulator {
        model: &plan.model,
        summaries: &plan.summaries,
    }
}

/// Accepted pairs for target `t`, split into training and validation parts.
pub fn sample(plan: &Plan, unit: &Unit, prepared: &Prepared, t: usize) -> Result<(TrainingSet, TrainingSet)> {
    let set = plan
        .config
        .sampling
        .sampler
        .sample(
            &simulator(plan),
            &prepared.observed,
            &plan.distance,
            plan.targets[t],
            derive_path(unit.seed, &[2, t as u64]),
        )
        .with_context(|| format!("sampling {}", target_label(&plan.targets[t])))?;
    Ok(abc_cde::split_train_validation(
        &set,
        plan.config.sampling.validation_fraction,
        derive_path(unit.seed, &[3, t as u64]),
    )?)
}

pub fn fit_seed(unit_seed: u64, target: usize, estimator: usize) -> u64 {
    derive_path(unit_seed, &[4, target as u64, estimator as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub replicate: usize,
    pub seed: u64,
    pub observation: String,
    pub observed_summaries: Vec<f64>,
    pub targets: Vec<TargetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: String,
    pub acceptance_rate: f64,
    /// `None` when nothing was rejected.
    pub epsilon: Option<f64>,
    pub n_proposed: usize,
    pub b_train: usize,
    pub b_validation: usize,
    pub estimators: Vec<EstimatorRecord>,
    pub comparisons: Vec<ComparisonRecord>,
    pub selected: Option<String>,
    pub best_true: Option<String>,
    pub importance: Option<ImportanceRecord>,
    pub curves: Option<CurveRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub estimator: String,
    pub seed: u64,
    pub tuning: Tuning,
    pub surrogate: LossReport,
    pub true_ise: f64,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub first: String,
    pub second: String,
    pub delta: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub decision: Decision,
    pub true_delta: f64,
    /// Whether a conclusive decision points the same way as the true losses.
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRecord {
    pub names: Vec<String>,
    pub u: Vec<f64>,
    /// `cutoff` rows of per-function scores.
    pub breakdown: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub thetas: Vec<f64>,
    /// `(label, density at each θ)`; the true posterior is labelled `oracle`.
    pub densities: Vec<(String, Vec<f64>)>,
}

pub fn run_unit(plan: &Plan, unit: &Unit) -> Result<UnitRecord> {
    let prepared = prepare(plan, unit)?;
    let mut targets = Vec::with_capacity(plan.targets.len());
    for t in 0..plan.targets.len() {
        targets.push(run_target(plan, unit, &prepared, t)?);
    }
    Ok(UnitRecord {
        replicate: unit.replicate,
        seed: unit.seed,
        observation: plan.config.observed.labels()[unit.observation].clone(),
        observed_summaries: prepared.observed.values.clone(),
        targets,
    })
}

fn run_target(plan: &Plan, unit: &Unit, prepared: &Prepared, t: usize) -> Result<TargetRecord> {
    let (train, validation) = sample(plan, unit, prepared, t)?;
    let grid = EvalGrid::covering(&train.thetas, Some(prepared.oracle.support()))?;
    let x = train.observed.clone();

    let mut fits: Vec<Box<dyn ConditionalDensity<f64>>> = Vec::new();
    let mut records = Vec::new();
    for (e, spec) in plan.config.estimators.iter().enumerate() {
        let seed = fit_seed(unit.seed, t, e);
        let fit = spec
            .fit(&train, &validation, seed)
            .with_context(|| format!("fitting {}", spec.label()))?;
        let surrogate = surrogate_loss(fit.as_ref(), &validation)?;
        let ise = true_ise(fit.as_ref(), &x, &prepared.oracle, &grid)?;
        records.push(EstimatorRecord {
            estimator: spec.label(),
            seed,
            tuning: fit.tuning(),
            warnings: fit.warnings(),
            surrogate,
            true_ise: ise,
        });
        fits.push(fit);
    }

    let mut comparisons = Vec::new();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            let c = compare_pair(
                fits[i].as_ref(),
                fits[j].as_ref(),
                &validation,
                plan.config.selection.confidence,
            )?;
            let true_delta = records[i].true_ise - records[j].true_ise;
            let agree = match c.decision {
                Decision::Inconclusive => None,
                Decision::PreferFirst => Some(true_delta < 0.0),
                Decision::PreferSecond => Some(true_delta > 0.0),
            };
            comparisons.push(ComparisonRecord {
                first: records[i].estimator.clone(),
                second: records[j].estimator.clone(),
                delta: c.delta,
                se: c.se,
                ci: c.ci,
                decision: c.decision,
                true_delta,
                agree,
            });
        }
    }

    let reports: Vec<LossReport> = records.iter().map(|r| r.surrogate.clone()).collect();
    let selected = select(&reports).map(|i| records[i].estimator.clone());
    let best_true = records
        .iter()
        .filter(|r| !r.true_ise.is_nan())
        .fold(None::<&EstimatorRecord>, |best, r| match best {
            Some(b) if b.true_ise <= r.true_ise => Some(b),
            _ => Some(r),
        })
        .map(|r| r.estimator.clone());

    let importance = match &plan.config.importance {
        None => None,
        Some(cfg) => {
            let method = RegressionMethod::TreeEnsemble(cfg.forest.clone());
            let s = importance(&train, cfg.cutoff, &method, derive_path(unit.seed, &[5, t as u64]))
                .context("statistic importance")?;
            Some(ImportanceRecord {
                breakdown: s.breakdown.iter_rows().map(|r| r.to_vec()).collect(),
                names: s.names,
                u: s.u,
            })
        }
    };

    let curves = match plan.config.curves.points {
        0 => None,
        n => {
            let (lo, hi) = grid.range();
            let thetas = EvalGrid::new(lo, hi, n.max(2))?.points().to_vec();
            let mut densities = vec![(
                "oracle".to_string(),
                thetas.iter().map(|&th| prepared.oracle.density(th)).collect(),
            )];
            for (fit, r) in fits.iter().zip(&records) {
                densities.push((r.estimator.clone(), fit.density_curve(&thetas, &x)));
            }
            Some(CurveRecord { thetas, densities })
        }
    };

    Ok(TargetRecord {
        target: target_label(&plan.targets[t]),
        acceptance_rate: train.acceptance_rate,
        epsilon: train.epsilon.is_finite().then_some(train.epsilon),
        n_proposed: train.n_proposed,
        b_train: train.len(),
        b_validation: validation.len(),
        estimators: records,
        comparisons,
        selected,
        best_true,
        importance,
        curves,
    })
}
