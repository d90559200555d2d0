//! Experiment configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use abc_cde::cde::{AdjustConfig, FlexCodeConfig, KdeConfig, NnKcdeConfig};
use abc_cde::{
    BenchmarkModel, DistanceFn, EstimatorSpec, ForestParams, ModelKind, RegressionMethod, RejectionSampler,
    SamplingTarget, Statistic, SummarySpec,
};
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub replicates: usize,
    /// Output directory, relative to the output root unless absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub model: ModelConfig,
    pub summaries: SummaryConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub observed: ObservedLaw,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceConfig>,
    #[serde(default)]
    pub curves: CurveConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_obs: usize,
    pub kind: ModelKind<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<BenchmarkModel> {
        let name = self.name.clone().unwrap_or_else(|| family_name(&self.kind).into());
        Ok(BenchmarkModel::new(name, self.kind.clone(), self.n_obs)?)
    }
}

fn family_name(kind: &ModelKind<f64>) -> &'static str {
    match kind {
        ModelKind::GaussianMean { .. } => "gaussian_mean",
        ModelKind::NormalGamma { .. } => "normal_gamma",
        ModelKind::MixtureMean { .. } => "mixture_mean",
        ModelKind::BivariateNormalMean { .. } => "bivariate_normal_mean",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryConfig {
    pub roster: Vec<Statistic>,
    #[serde(default)]
    pub noise_count: usize,
    /// Statistics the ABC distance is computed on; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_on: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    /// Accepted pairs before the train/validation split.
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub sampler: RejectionSampler,
}

fn default_validation_fraction() -> f64 {
    0.5
}

impl SamplingConfig {
    pub fn targets(&self) -> Result<Vec<SamplingTarget<f64>>> {
        let targets: Vec<_> = match (&self.rates, &self.epsilons) {
            (Some(_), Some(_)) => bail!("sampling: give either rates or epsilons, not both"),
            (None, None) => bail!("sampling: one of rates or epsilons is required"),
            (Some(rates), None) => rates
                .iter()
                .map(|&r| SamplingTarget::from_parts(Some(r), None, self.b))
                .collect::<abc_cde::Result<_>>()?,
            (None, Some(eps)) => eps
                .iter()
                .map(|&e| SamplingTarget::from_parts(None, Some(e), self.b))
                .collect::<abc_cde::Result<_>>()?,
        };
        ensure!(!targets.is_empty(), "sampling: the target list is empty");
        Ok(targets)
    }
}

pub fn target_label(t: &SamplingTarget<f64>) -> String {
    match t {
        SamplingTarget::Rate { rate, .. } => format!("rate={rate}"),
        SamplingTarget::Epsilon { epsilon, .. } => format!("epsilon={epsilon}"),
    }
}

/// How the observed dataset of each replicate is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservedLaw {
    /// Every observation drawn from N(0, 1).
    #[default]
    StandardNormal,
    /// One study per value; every observation of the dataset equals it.
    Fixed { values: Vec<f64> },
}

impl ObservedLaw {
    pub fn labels(&self) -> Vec<String> {
        match self {
            ObservedLaw::StandardNormal => vec!["standard_normal".into()],
            ObservedLaw::Fixed { values } => values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub confidence: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { confidence: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    pub cutoff: usize,
    pub forest: ForestParams,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            cutoff: 5,
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    /// θ points per density curve; 0 disables curves.
    pub points: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { points: 201 }
    }
}

/// Everything a replicate needs, checked and built once.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub model: BenchmarkModel,
    pub summaries: SummarySpec,
    pub distance: DistanceFn,
    pub targets: Vec<SamplingTarget<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks every section and builds the replicate plan. Nothing is simulated.
    pub fn plan(&self) -> Result<Plan> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        ensure!(self.replicates >= 1, "replicates must be at least 1");
        if let Some(0) = self.threads {
            bail!("threads must be at least 1");
        }
        let model = self.model.build().context("model")?;
        let summaries =
            SummarySpec::new(self.summaries.roster.clone(), self.summaries.noise_count).context("summaries")?;
        let names = summaries.names(model.data_dim());
        let distance = match &self.summaries.distance_on {
            None => DistanceFn::euclidean(),
            Some(wanted) => DistanceFn::on_names(&names, wanted).context("summaries.distance_on")?,
        };
        let targets = self.sampling.targets()?;
        let f = self.sampling.validation_fraction;
        ensure!(
            f > 0.0 && f < 1.0,
            "sampling.validation_fraction must lie in (0, 1), got {f}"
        );
        ensure!(!self.estimators.is_empty(), "at least one estimator is required");
        let mut seen = BTreeSet::new();
        for e in &self.estimators {
            e.validate().with_context(|| format!("estimator {}", e.label()))?;
            ensure!(seen.insert(e.label()), "estimator {} is listed twice", e.label());
        }
        let c = self.selection.confidence;
        ensure!(c > 0.0 && c < 1.0, "selection.confidence must lie in (0, 1), got {c}");
        if let Some(imp) = &self.importance {
            ensure!(imp.cutoff >= 1, "importance.cutoff must be at least 1");
            imp.forest.validate().context("importance.forest")?;
        }
        if let ObservedLaw::Fixed { values } = &self.observed {
            ensure!(!values.is_empty(), "observed.values is empty");
            ensure!(values.iter().all(|v| v.is_finite()), "observed.values must be finite");
        }
        Ok(Plan {
            config: self.clone(),
            model,
            summaries,
            distance,
            targets,
        })
    }
}

/// Estimator with default tuning grids, by table label.
pub fn default_estimator(name: &str) -> Result<EstimatorSpec> {
    Ok(match name {
        "abc_kde" => EstimatorSpec::AbcKde(KdeConfig::default()),
        "nn_kcde" => EstimatorSpec::NnKcde(NnKcdeConfig::default()),
        "flexcode_nn" => EstimatorSpec::FlexCode(FlexCodeConfig::nearest_neighbors(NnKcdeConfig::default().k_grid)),
        "flexcode_rf" => EstimatorSpec::FlexCode(FlexCodeConfig {
            i_max: 15,
            regressor: RegressionMethod::TreeEnsemble(ForestParams::default()),
        }),
        "adjusted_kde" => EstimatorSpec::AdjustedKde(AdjustConfig::default()),
        other => {
            bail!("unknown estimator `{other}` (expected abc_kde, nn_kcde, flexcode_nn, flexcode_rf or adjusted_kde)")
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
seed = 7
replicates = 2

[model]
n_obs = 20
kind = { family = "gaussian_mean", prior_mean = 0.0, prior_sd = 1.0, noise_sd = 1.0 }

[summaries]
roster = ["mean"]

[sampling]
rates = [0.1]
B = 200

[[estimators]]
kind = "abc_kde"

[[estimators]]
kind = "flexcode"
regressor = { kind = "nearest_neighbors", k_grid = [5, 10] }
"#;

    #[test]
    fn minimal_config_plans() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let plan = cfg.plan().unwrap();
        let labels: Vec<String> = plan.config.estimators.iter().map(|e| e.label()).collect();
        assert_eq!(labels, ["abc_kde", "flexcode_nn"]);
        assert_eq!(plan.targets, [SamplingTarget::Rate { rate: 0.1, b: 200 }]);
        assert_eq!(cfg.observed, ObservedLaw::StandardNormal);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse(&MINIMAL.replace("replicates = 2", "replicates = 2\ncolour = 1")).is_err());
        assert!(
            ExperimentConfig::parse(&MINIMAL.replace("kind = \"abc_kde\"", "kind = \"abc_kde\"\nbandwidth = 1"))
                .is_err()
        );
        assert!(ExperimentConfig::parse(&MINIMAL.replace("noise_sd = 1.0", "noise_sd = 1.0, skew = 2")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("\"abc_kde\"", "\"histogram\"")).is_err());
    }

    #[test]
    fn invalid_sections_fail_planning() {
        let bad = |from: &str, to: &str| {
            ExperimentConfig::parse(&MINIMAL.replace(from, to))
                .unwrap()
                .plan()
                .is_err()
        };
        assert!(bad("schema_version = 1", "schema_version = 2"));
        assert!(bad("rates = [0.1]", "rates = [0.1]\nepsilons = [0.5]"));
        assert!(bad("rates = [0.1]", "rates = [1.5]"));
        assert!(bad("roster = [\"mean\"]", "roster = []"));
        assert!(bad(
            "roster = [\"mean\"]",
            "roster = [\"mean\"]\ndistance_on = [\"sd\"]"
        ));
        assert!(bad("replicates = 2", "replicates = 0"));
        assert!(bad("k_grid = [5, 10]", "k_grid = []"));
    }

    #[test]
    fn default_estimators_by_name() {
        for name in ["abc_kde", "nn_kcde", "flexcode_nn", "flexcode_rf", "adjusted_kde"] {
            assert_eq!(default_estimator(name).unwrap().label(), name);
        }
        assert!(default_estimator("ridge").is_err());
    }
}
