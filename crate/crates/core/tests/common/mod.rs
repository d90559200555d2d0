#![allow(dead_code)]

use abc_cde::abc::{self, TrainingSet};
use abc_cde::cde::EvalGrid;
use abc_cde::models::{BenchmarkModel, ModelKind, NormalGammaTarget, RawDataset};
use abc_cde::oracle::PosteriorOracle;
use abc_cde::quadrature::trapezoid;
use abc_cde::rng::derive_seed;
use abc_cde::summaries::SummarySpec;
use abc_cde::{DistanceFn, RejectionSampler, SamplingTarget, Simulator};

pub struct Replicate {
    pub train: TrainingSet<f64>,
    pub validation: TrainingSet<f64>,
    pub oracle: PosteriorOracle<f64>,
    pub grid: EvalGrid<f64>,
}

/// ABC sample at `target`, split into training and validation halves.
pub fn replicate(
    model: &BenchmarkModel<f64>,
    spec: &SummarySpec,
    distance: &DistanceFn,
    data: &RawDataset<f64>,
    target: SamplingTarget<f64>,
    seed: u64,
) -> Replicate {
    let sim = Simulator { model, summaries: spec };
    let observed = sim.observe(data, seed);
    let set = RejectionSampler::default()
        .sample(&sim, &observed, distance, target, seed)
        .expect("sampling");
    let (train, validation) = abc::split_train_validation(&set, 0.5, derive_seed(seed, 2)).expect("split");
    let oracle = model.true_posterior(data).expect("oracle");
    let grid = EvalGrid::covering(&train.thetas, Some(oracle.support())).expect("grid");
    Replicate {
        train,
        validation,
        oracle,
        grid,
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn variance(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean) * (x - mean) / var + (2.0 * std::f64::consts::PI * var).ln())
}

fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// `∫ exp(f(t)) dt` over `[lo, hi]` on `n` points, scaled by `exp(-shift)`.
fn integrate_exp<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, shift: f64) -> f64 {
    let ts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| (f(t) - shift).exp()).collect();
    trapezoid(&ts, &vals)
}

/// Posterior of the model's target on `grid` from prior × likelihood by
/// quadrature, normalized on the grid. Nuisance parameters are integrated out
/// numerically.
pub fn brute_force_posterior(model: &BenchmarkModel<f64>, data: &RawDataset<f64>, grid: &[f64]) -> Vec<f64> {
    let n = data.n_obs() as f64;
    let log_post: Vec<f64> = match model.kind() {
        ModelKind::GaussianMean {
            prior_mean,
            prior_sd,
            noise_sd,
        } => grid
            .iter()
            .map(|&mu| {
                ln_normal(mu, *prior_mean, prior_sd * prior_sd)
                    + data
                        .values()
                        .iter()
                        .map(|&x| ln_normal(x, mu, noise_sd * noise_sd))
                        .sum::<f64>()
            })
            .collect(),
        ModelKind::MixtureMean {
            weights,
            means,
            sds,
            noise_sd,
        } => grid
            .iter()
            .map(|&mu| {
                let prior: f64 = weights
                    .iter()
                    .zip(means)
                    .zip(sds)
                    .map(|((w, m), s)| w * ln_normal(mu, *m, s * s).exp())
                    .sum();
                prior.ln()
                    + data
                        .values()
                        .iter()
                        .map(|&x| ln_normal(x, mu, noise_sd * noise_sd))
                        .sum::<f64>()
            })
            .collect(),
        ModelKind::NormalGamma {
            mu0,
            nu0,
            alpha0,
            beta0,
            target,
        } => {
            let xs = data.values();
            let xbar = xs.iter().sum::<f64>() / n;
            let ss: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
            let joint = |mu: f64, tau: f64| {
                ln_gamma_density(tau, *alpha0, *beta0) + ln_normal(mu, *mu0, 1.0 / (nu0 * tau)) + 0.5 * n * tau.ln()
                    - 0.5 * tau * (ss + n * (xbar - mu) * (xbar - mu))
            };
            match target {
                NormalGammaTarget::Precision => grid
                    .iter()
                    .map(|&tau| {
                        let center = (nu0 * mu0 + n * xbar) / (nu0 + n);
                        let sd = 1.0 / ((nu0 + n) * tau).sqrt();
                        let shift = joint(center, tau);
                        integrate_exp(|mu| joint(mu, tau), center - 14.0 * sd, center + 14.0 * sd, 801, shift).ln()
                            + shift
                    })
                    .collect(),
                NormalGammaTarget::Mean => grid
                    .iter()
                    .map(|&mu| {
                        let shape = alpha0 + (n + 1.0) / 2.0;
                        let rate = beta0 + 0.5 * (nu0 * (mu - mu0) * (mu - mu0) + ss + n * (xbar - mu) * (xbar - mu));
                        let mode = (shape - 1.0) / rate;
                        let hi = (shape + 30.0 * shape.sqrt()) / rate;
                        let shift = joint(mu, mode);
                        integrate_exp(|tau| joint(mu, tau), hi * 1e-9, hi, 4001, shift).ln() + shift
                    })
                    .collect(),
            }
        }
        ModelKind::BivariateNormalMean {
            prior_mean,
            prior_cov,
            noise_cov,
            component,
        } => {
            let c = *component;
            let o = 1 - c;
            let xbar = [
                data.column(0).iter().sum::<f64>() / n,
                data.column(1).iter().sum::<f64>() / n,
            ];
            let ln_mvn = |x: [f64; 2], m: [f64; 2], s: [[f64; 2]; 2]| {
                let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
                let d = [x[0] - m[0], x[1] - m[1]];
                let q = (s[1][1] * d[0] * d[0] - (s[0][1] + s[1][0]) * d[0] * d[1] + s[0][0] * d[1] * d[1]) / det;
                -0.5 * q - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln()
            };
            let lik_cov = [
                [noise_cov[0][0] / n, noise_cov[0][1] / n],
                [noise_cov[1][0] / n, noise_cov[1][1] / n],
            ];
            let joint = |mu: [f64; 2]| ln_mvn(mu, *prior_mean, *prior_cov) + ln_mvn(xbar, mu, lik_cov);
            let lo = prior_mean[o].min(xbar[o]) - 10.0;
            let hi = prior_mean[o].max(xbar[o]) + 10.0;
            grid.iter()
                .map(|&t| {
                    let at = |u: f64| {
                        let mut mu = [0.0; 2];
                        mu[c] = t;
                        mu[o] = u;
                        joint(mu)
                    };
                    let shift = at(xbar[o]);
                    integrate_exp(at, lo, hi, 8001, shift).ln() + shift
                })
                .collect()
        }
    };
    let peak = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_post.iter().map(|l| (l - peak).exp()).collect();
    let z = trapezoid(grid, &unnorm);
    unnorm.iter().map(|u| u / z).collect()
}

/// Largest absolute difference between the oracle and the brute-force
/// posterior on a 2000-point grid over the oracle support.
pub fn oracle_sup_error(model: &BenchmarkModel<f64>, data: &RawDataset<f64>) -> f64 {
    let oracle = model.true_posterior(data).expect("oracle");
    let (a, b) = oracle.support();
    // clamp so rounding never steps outside the support
    let grid: Vec<f64> = (0..2000)
        .map(|i| (a + (b - a) * i as f64 / 1999.0).clamp(a, b))
        .collect();
    let brute = brute_force_posterior(model, data, &grid);
    grid.iter()
        .zip(&brute)
        .map(|(&t, &p)| (oracle.density(t) - p).abs())
        .fold(0.0, f64::max)
}

/// Training set built directly from θ values and covariate rows, with an
/// identity standardizer and Euclidean distances to `observed`.
pub fn synthetic_set(thetas: Vec<f64>, rows: Vec<Vec<f64>>, observed: Vec<f64>) -> TrainingSet<f64> {
    use abc_cde::linalg::Matrix;
    use abc_cde::summaries::Standardizer;
    let d = observed.len();
    let distance = DistanceFn::euclidean();
    let distances = rows.iter().map(|r| distance.distance(r, &observed)).collect();
    let covariates = Matrix::from_rows(&rows);
    TrainingSet {
        n_proposed: thetas.len(),
        thetas,
        summaries: covariates.clone(),
        covariates,
        names: (1..=d).map(|j| format!("x{j}")).collect(),
        observed_raw: observed.clone(),
        observed,
        distances,
        epsilon: f64::INFINITY,
        acceptance_rate: 1.0,
        standardizer: Standardizer::identity(d),
        distance,
        seed: 0,
        warnings: Vec::new(),
    }
}
