//! Command-line runner for ABC-CDE experiments.

mod bundle;
mod config;
mod replicate;
mod run;
mod store;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abc_cde::{EstimatorSpec, ForestParams, RegressionMethod};
use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand};

use config::{target_label, ExperimentConfig};
use store::{SetContext, StoredSet};

/// Environment variable naming the default output root.
const OUTPUT_ROOT_ENV: &str = "ABC_CDE_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "results";

/// Exit status of a run with too many failed replicates.
const EXIT_UNHEALTHY: u8 = 2;

#[derive(Parser)]
#[command(
    name = "abc-cde",
    version,
    about = "Likelihood-free conditional density estimation experiments"
)]
struct Cli {
    /// Worker threads (overrides the config).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV, default_value = DEFAULT_OUTPUT_ROOT, hide = true)]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of an experiment config.
    Run { config: PathBuf },
    /// Write the training and validation sets of one replicate.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        /// Index into the config's rates or epsilons.
        #[arg(long, default_value_t = 0)]
        target: usize,
    },
    /// Fit one estimator to a stored set.
    Fit {
        set: PathBuf,
        /// Estimator name (abc_kde, nn_kcde, flexcode_nn, flexcode_rf, adjusted_kde)
        /// or a TOML file holding one estimator table.
        #[arg(long)]
        estimator: String,
    },
    /// Surrogate and true losses of the stored fits.
    Evaluate {
        set: PathBuf,
        #[arg(long)]
        fits: Option<PathBuf>,
    },
    /// Summary-statistic importance table from a stored set.
    Importance {
        set: PathBuf,
        #[arg(long, default_value_t = 5)]
        cutoff: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
    },
    /// Pick the stored fit with the smallest surrogate loss.
    Select {
        set: PathBuf,
        #[arg(long)]
        fits: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn experiment_dir(cli: &Cli, cfg: &ExperimentConfig, config_path: &Path) -> PathBuf {
    if let Some(out) = &cli.out {
        return out.clone();
    }
    let leaf = cfg.output.clone().unwrap_or_else(|| {
        PathBuf::from(
            cfg.name
                .clone()
                .or_else(|| config_path.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "experiment".into()),
        )
    });
    cli.output_root.join(leaf)
}

fn parse_estimator(arg: &str) -> Result<EstimatorSpec> {
    let path = Path::new(arg);
    if path.extension().is_some_and(|x| x == "toml") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return toml::from_str(&text).with_context(|| format!("parsing {arg}"));
    }
    config::default_estimator(arg)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let plan = cfg.plan()?;
            init_threads(cli.threads.or(cfg.threads))?;
            let out = experiment_dir(cli, &cfg, config);
            let meta = run::run(&plan, cli.seed.unwrap_or(cfg.seed), &out)?;
            println!(
                "{}: {} of {} replicates completed, {} failed",
                out.display(),
                meta.completed,
                meta.replicates,
                meta.failed.len()
            );
            if !meta.healthy {
                eprintln!(
                    "error: more than {:.0}% of replicates failed",
                    100.0 * run::MAX_FAILED_FRACTION
                );
                return Ok(ExitCode::from(EXIT_UNHEALTHY));
            }
        }
        Command::Simulate {
            config,
            replicate,
            target,
        } => {
            let cfg = ExperimentConfig::load(config)?;
            let plan = cfg.plan()?;
            init_threads(cli.threads.or(cfg.threads))?;
            ensure!(*target < plan.targets.len(), "--target {target} is out of range");
            let units = replicate::units(&plan, cli.seed.unwrap_or(cfg.seed));
            let unit = *units
                .get(*replicate)
                .with_context(|| format!("--replicate {replicate} is out of range (0..{})", units.len()))?;
            let prepared = replicate::prepare(&plan, &unit)?;
            let (train, validation) = replicate::sample(&plan, &unit, &prepared, *target)?;
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| experiment_dir(cli, &cfg, config).join(format!("set_r{replicate}_t{target}")));
            StoredSet {
                context: SetContext {
                    version: run::version_string(),
                    replicate: unit.replicate,
                    seed: unit.seed,
                    target: target_label(&plan.targets[*target]),
                    model: plan.model.clone(),
                    data: prepared.data,
                },
                train,
                validation,
            }
            .write(&out)?;
            println!("{}", out.display());
        }
        Command::Fit { set, estimator } => {
            let spec = parse_estimator(estimator)?;
            init_threads(cli.threads)?;
            let stored = StoredSet::read(set)?;
            let seed = cli.seed.unwrap_or(stored.context.seed);
            let (record, thetas, curve) = store::fit(&stored, spec, seed)?;
            let out = cli.out.clone().unwrap_or_else(|| set.join("fits"));
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join(format!("{}.json", record.label)),
                serde_json::to_vec_pretty(&record)?,
            )?;
            store::write_curve(&out.join(format!("{}_curve.csv", record.label)), &thetas, &curve)?;
            println!(
                "{} surrogate loss {} (se {})",
                record.label, record.surrogate.value, record.surrogate.se
            );
        }
        Command::Evaluate { set, fits } => {
            init_threads(cli.threads)?;
            let stored = StoredSet::read(set)?;
            let fits = store::read_fits(&fits.clone().unwrap_or_else(|| set.join("fits")))?;
            let out = cli.out.clone().unwrap_or_else(|| set.clone());
            std::fs::create_dir_all(&out)?;
            store::evaluate(&stored, &fits, &out.join("losses.csv"))?;
            println!("{}", out.join("losses.csv").display());
        }
        Command::Importance { set, cutoff, trees } => {
            init_threads(cli.threads)?;
            let stored = StoredSet::read(set)?;
            let method = RegressionMethod::TreeEnsemble(ForestParams {
                n_trees: *trees,
                ..ForestParams::default()
            });
            let out = cli.out.clone().unwrap_or_else(|| set.clone());
            std::fs::create_dir_all(&out)?;
            let seed = cli.seed.unwrap_or(stored.context.seed);
            store::importance_table(&stored, *cutoff, &method, seed, &out.join("importance.csv"))?;
            println!("{}", out.join("importance.csv").display());
        }
        Command::Select { set, fits, confidence } => {
            init_threads(cli.threads)?;
            ensure!(
                *confidence > 0.0 && *confidence < 1.0,
                "--confidence must lie in (0, 1)"
            );
            let stored = StoredSet::read(set)?;
            let fits = store::read_fits(&fits.clone().unwrap_or_else(|| set.join("fits")))?;
            let out = cli.out.clone().unwrap_or_else(|| set.clone());
            std::fs::create_dir_all(&out)?;
            let best = store::select_fits(&stored, &fits, *confidence, &out.join("selection.csv"))?;
            println!("selected {best}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
