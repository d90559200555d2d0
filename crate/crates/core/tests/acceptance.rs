//! End-to-end acceptance checks. Run with `cargo test -p abc-cde --test acceptance`;
//! an optional argument filters criteria by name.

mod common;

use std::time::Instant;

use abc_cde::cde::basis::fourier_values;
use abc_cde::cde::kernel::{convolution, self_convolution_at_zero};
use abc_cde::cde::nnkcde::NnKcde;
use abc_cde::cde::{
    fit_abc_kde, fit_adjusted_kde, fit_flexcode, fit_nnkcde, AdjustConfig, ConditionalDensity, FlexCodeConfig,
    KdeConfig, NnKcdeConfig, OracleEstimate,
};
use abc_cde::loss::{compare_pair, surrogate_loss, true_ise, Decision};
use abc_cde::models::{BenchmarkModel, ModelKind, RawDataset};
use abc_cde::num::linspace;
use abc_cde::quadrature::trapezoid;
use abc_cde::regression::{ForestParams, RegressionMethod};
use abc_cde::rng::{derive_seed, stream};
use abc_cde::summaries::relevance::relevance_profile;
use abc_cde::summaries::{importance, Statistic, SummarySpec};
use abc_cde::{DistanceFn, RejectionSampler, SamplingTarget, Simulator};
use common::{median, oracle_sup_error, replicate, variance};
use statrs::distribution::{Binomial, DiscreteCDF};

const SEED: u64 = 20_170_301;

type Check = fn() -> (bool, String);

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, Check); 7] = [
        ("acceptance_rate_profile", acceptance_rate_profile),
        ("surrogate_loss_validity", surrogate_loss_validity),
        ("method_selection_agreement", method_selection_agreement),
        ("importance_selection", importance_selection),
        ("multimodal_adjustment_failure", multimodal_adjustment_failure),
        ("numerical_identities", numerical_identities),
        ("relevance_truncation_trend", relevance_truncation_trend),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (pass, detail) = check();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {name} ({secs:.1}s): {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn mean_only() -> SummarySpec {
    SummarySpec::new(vec![Statistic::Mean], 0).unwrap()
}

fn ise(est: &dyn ConditionalDensity<f64>, rep: &common::Replicate) -> f64 {
    true_ise(est, &rep.train.observed, &rep.oracle, &rep.grid).unwrap()
}

/// Prior N(1, 0.5²), five observations with noise SD 0.2, x_o with mean 0.
fn acceptance_rate_profile() -> (bool, String) {
    let model = BenchmarkModel::new(
        "narrow_likelihood",
        ModelKind::GaussianMean {
            prior_mean: 1.0,
            prior_sd: 0.5,
            noise_sd: 0.2,
        },
        5,
    )
    .unwrap();
    let spec = mean_only();
    let data = RawDataset::univariate(vec![0.0; 5]).unwrap();
    let mut medians = Vec::new();
    for rate in [0.01, 1.0] {
        let (mut kde, mut nn) = (Vec::new(), Vec::new());
        for r in 0..20 {
            let rep = replicate(
                &model,
                &spec,
                &DistanceFn::euclidean(),
                &data,
                SamplingTarget::Rate { rate, b: 2000 },
                derive_seed(SEED, r),
            );
            kde.push(ise(&fit_abc_kde(&rep.train, &KdeConfig::default()).unwrap(), &rep));
            nn.push(ise(
                &fit_nnkcde(&rep.train, &rep.validation, &NnKcdeConfig::default()).unwrap(),
                &rep,
            ));
        }
        medians.push((median(&kde), median(&nn)));
    }
    let [(kde_01, nn_01), (kde_1, nn_1)] = [medians[0], medians[1]];
    let a = kde_1 >= 3.0 * kde_01;
    let b = nn_1 <= 2.0 * nn_01;
    let c = nn_1 < 0.5 * kde_1;
    (
        a && b && c,
        format!(
            "median ISE abc_kde {kde_01:.4} -> {kde_1:.4} (a: {a}), nn_kcde {nn_01:.4} -> {nn_1:.4} (b: {b}), \
             nn/abc at rate 1 {:.3} (c: {c})",
            nn_1 / kde_1
        ),
    )
}

fn surrogate_loss_validity() -> (bool, String) {
    let model = BenchmarkModel::known_variance_mean(1.0, 20).unwrap();
    let spec = mean_only();
    let sim = Simulator {
        model: &model,
        summaries: &spec,
    };
    let data = model.standard_normal_dataset(&mut stream(derive_seed(SEED, 100)));
    let oracle = model.true_posterior(&data).unwrap();
    let k_f = oracle.squared_integral();
    let est = OracleEstimate::new(oracle);
    let observed = sim.observe(&data, SEED);
    let sampler = RejectionSampler::default();
    let run = |epsilon: f64, b: usize, seed: u64| {
        let set = sampler
            .sample(
                &sim,
                &observed,
                &DistanceFn::euclidean(),
                SamplingTarget::Epsilon { epsilon, b },
                seed,
            )
            .unwrap();
        surrogate_loss(&est, &set).unwrap()
    };

    let mut bias = Vec::new();
    for (i, eps) in [1.0, 0.5, 0.1].into_iter().enumerate() {
        let r = run(eps, 5000, derive_seed(SEED, 200 + i as u64));
        bias.push(((r.value + k_f).abs(), r.se));
    }
    let monotone = bias
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt());

    let values = |b: usize, offset: u64| -> Vec<f64> {
        (0..100)
            .map(|s| run(0.5, b, derive_seed(SEED, offset + s)).value)
            .collect()
    };
    let ratio = variance(&values(400, 1000)) / variance(&values(1600, 2000));
    let scaling = (2.0..=6.0).contains(&ratio);
    (
        monotone && scaling,
        format!(
            "|L+K_f| over eps {{1, 0.5, 0.1}} = {:.4}, {:.4}, {:.4} (monotone: {monotone}); \
             var ratio B'=400/1600 = {ratio:.2} (in [2, 6]: {scaling})",
            bias[0].0, bias[1].0, bias[2].0
        ),
    )
}

fn full_roster(noise: usize) -> SummarySpec {
    SummarySpec::new(Statistic::ALL.to_vec(), noise).unwrap()
}

fn method_selection_agreement() -> (bool, String) {
    let model = BenchmarkModel::known_variance_mean(5.0, 20).unwrap();
    let spec = full_roster(0);
    let names = spec.names(1);
    let distance = DistanceFn::on_names(&names, &["mean".to_string()]).unwrap();
    let flex_cfg = FlexCodeConfig::nearest_neighbors(vec![5, 10, 20, 35, 50, 75, 100, 150, 200]);
    let (mut decided, mut decided_agree, mut sign_agree) = (0usize, 0usize, 0usize);
    let reps = 50;
    for r in 0..reps {
        let seed = derive_seed(SEED, 300 + r);
        let data = model.standard_normal_dataset(&mut stream(derive_seed(seed, 7)));
        let rep = replicate(
            &model,
            &spec,
            &distance,
            &data,
            SamplingTarget::Rate { rate: 0.01, b: 2000 },
            seed,
        );
        let kde = fit_abc_kde(&rep.train, &KdeConfig::default()).unwrap();
        let flex = fit_flexcode(&rep.train, &rep.validation, &flex_cfg, seed).unwrap();
        let truth_first = ise(&kde, &rep) < ise(&flex, &rep);
        let cmp = compare_pair(&kde, &flex, &rep.validation, 0.95).unwrap();
        if (cmp.delta < 0.0) == truth_first {
            sign_agree += 1;
        }
        match cmp.decision {
            Decision::Inconclusive => {}
            d => {
                decided += 1;
                if (d == Decision::PreferFirst) == truth_first {
                    decided_agree += 1;
                }
            }
        }
    }
    let filtered = decided_agree as f64 / decided.max(1) as f64;
    let unfiltered = sign_agree as f64 / reps as f64;
    let pass = decided > 0 && filtered > 0.7 && filtered >= unfiltered;
    (
        pass,
        format!("agreement {filtered:.2} over {decided} conclusive comparisons, {unfiltered:.2} over all {reps}"),
    )
}

fn importance_selection() -> (bool, String) {
    let spec = full_roster(10);
    let method = RegressionMethod::TreeEnsemble(ForestParams::default());
    let scores_for = |model: &BenchmarkModel<f64>, seed: u64| {
        let sim = Simulator {
            model,
            summaries: &spec,
        };
        let data = model.standard_normal_dataset(&mut stream(derive_seed(seed, 1)));
        let observed = sim.observe(&data, seed);
        let set = RejectionSampler::default()
            .sample(
                &sim,
                &observed,
                &DistanceFn::euclidean(),
                SamplingTarget::Rate { rate: 1.0, b: 10_000 },
                seed,
            )
            .unwrap();
        importance(&set, 5, &method, derive_seed(seed, 3)).unwrap()
    };
    let stat_of = |name: &str| name.parse::<Statistic>().ok();

    let s1 = scores_for(
        &BenchmarkModel::known_variance_mean(1.0, 20).unwrap(),
        derive_seed(SEED, 400),
    );
    let max1 = s1.max();
    let worst_noise = s1
        .names
        .iter()
        .zip(&s1.u)
        .filter(|(n, _)| n.starts_with("noise"))
        .map(|(_, &u)| u / max1)
        .fold(0.0, f64::max);
    let top1 = &s1.names[s1.argmax()];
    let location = stat_of(top1).is_some_and(|s| s.is_location());

    let s2 = scores_for(
        &BenchmarkModel::unknown_precision(0.5, 20).unwrap(),
        derive_seed(SEED, 401),
    );
    let top2 = &s2.names[s2.argmax()];
    let dispersion = stat_of(top2).is_some_and(|s| s.is_dispersion());

    let noise_ok = worst_noise < 0.05;
    (
        noise_ok && location && dispersion,
        format!(
            "mean-model top {top1} (location: {location}), largest noise share {worst_noise:.4} (< 0.05: {noise_ok}); \
             precision-model top {top2} (dispersion: {dispersion})"
        ),
    )
}

fn sign_test_p(successes: u64, n: u64) -> f64 {
    let bin = Binomial::new(0.5, n).unwrap();
    let k = successes.max(n - successes);
    (2.0 * (1.0 - bin.cdf(k - 1))).min(1.0)
}

fn multimodal_adjustment_failure() -> (bool, String) {
    let model = BenchmarkModel::default_mixture(5).unwrap();
    let spec = mean_only();
    let (mut nn, mut kde, mut adj) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..20 {
        let seed = derive_seed(SEED, 500 + r);
        let data = model.standard_normal_dataset(&mut stream(derive_seed(seed, 7)));
        let rep = replicate(
            &model,
            &spec,
            &DistanceFn::euclidean(),
            &data,
            SamplingTarget::Rate { rate: 1.0, b: 2000 },
            seed,
        );
        nn.push(ise(
            &fit_nnkcde(&rep.train, &rep.validation, &NnKcdeConfig::default()).unwrap(),
            &rep,
        ));
        kde.push(ise(&fit_abc_kde(&rep.train, &KdeConfig::default()).unwrap(), &rep));
        adj.push(ise(
            &fit_adjusted_kde(&rep.train, &AdjustConfig::default()).unwrap(),
            &rep,
        ));
    }
    let (m_nn, m_kde, m_adj) = (median(&nn), median(&kde), median(&adj));
    let wins = nn.iter().zip(&adj).filter(|(a, b)| a < b).count() as u64;
    let p = sign_test_p(wins, 20);
    let ordered = m_nn < m_kde && m_kde < m_adj;
    (
        ordered && p < 0.05,
        format!(
            "median ISE nn_kcde {m_nn:.4} < abc_kde {m_kde:.4} < adjusted_kde {m_adj:.4}: {ordered}; \
             nn_kcde better in {wins}/20, sign test p = {p:.4}"
        ),
    )
}

fn numerical_identities() -> (bool, String) {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        notes.push(format!("{name} {}", if pass { "ok" } else { detail.as_str() }));
    };

    let c0 = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
    let conv_err = (self_convolution_at_zero::<f64>() - c0)
        .abs()
        .max((convolution(0.0, 1.0) - c0).abs());
    record("convolution", conv_err < 1e-12, format!("error {conv_err:e}"));

    let us = linspace(0.0, 1.0, 8193);
    let phis: Vec<Vec<f64>> = us
        .iter()
        .map(|&u| {
            let mut v = vec![0.0; 31];
            fourier_values(u, &mut v);
            v
        })
        .collect();
    let mut gram_err: f64 = 0.0;
    for i in 0..31 {
        for j in 0..31 {
            let f: Vec<f64> = phis.iter().map(|p| p[i] * p[j]).collect();
            let target = if i == j { 1.0 } else { 0.0 };
            gram_err = gram_err.max((trapezoid(&us, &f) - target).abs());
        }
    }
    record("gram", gram_err < 1e-10, format!("gram error {gram_err:e}"));

    let model = BenchmarkModel::known_variance_mean(1.0, 20).unwrap();
    let spec = SummarySpec::new(vec![Statistic::Mean, Statistic::Sd], 2).unwrap();
    let data = model.standard_normal_dataset(&mut stream(SEED));
    let rep = replicate(
        &model,
        &spec,
        &DistanceFn::euclidean(),
        &data,
        SamplingTarget::Rate { rate: 0.1, b: 1000 },
        derive_seed(SEED, 600),
    );

    let method = RegressionMethod::TreeEnsemble(ForestParams {
        n_trees: 20,
        ..ForestParams::default()
    });
    let scores = importance(&rep.train, 6, &method, SEED).unwrap();
    let mut avg_exact = true;
    for j in 0..scores.u.len() {
        let mut s = 0.0;
        for i in 0..scores.cutoff {
            s += scores.breakdown.get(i, j);
        }
        avg_exact &= (s / scores.cutoff as f64).to_bits() == scores.u[j].to_bits();
    }
    record("averaging", avg_exact, "importance average differs".into());

    let ks = [5, 10, 20, 50];
    let hs = [0.05, 0.1, 0.3];
    let grid = NnKcde::nested_loss_grid(&rep.train, &rep.validation, &ks, &hs).unwrap();
    let mut nested_err: f64 = 0.0;
    for (a, &k) in ks.iter().enumerate() {
        for (b, &h) in hs.iter().enumerate() {
            let single = NnKcde::with_params(&rep.train, k, h).unwrap();
            let v = surrogate_loss(&single, &rep.validation).unwrap().value;
            nested_err = nested_err.max((v - grid.values.get(a, b)).abs());
        }
    }
    record("nested", nested_err <= 1e-10, format!("nested-k error {nested_err:e}"));

    let estimators: Vec<Box<dyn ConditionalDensity<f64>>> = vec![
        Box::new(fit_abc_kde(&rep.train, &KdeConfig::default()).unwrap()),
        Box::new(fit_nnkcde(&rep.train, &rep.validation, &NnKcdeConfig::default()).unwrap()),
        Box::new(
            fit_flexcode(
                &rep.train,
                &rep.validation,
                &FlexCodeConfig::nearest_neighbors(vec![5, 10, 20, 50]),
                SEED,
            )
            .unwrap(),
        ),
        Box::new(
            fit_flexcode(
                &rep.train,
                &rep.validation,
                &FlexCodeConfig {
                    i_max: 15,
                    regressor: method.clone(),
                },
                SEED,
            )
            .unwrap(),
        ),
        Box::new(fit_adjusted_kde(&rep.train, &AdjustConfig::default()).unwrap()),
    ];
    let (lo, hi) = rep.grid.range();
    let wide = linspace(lo - 3.0, hi + 3.0, 20001);
    let mut norm_err: f64 = 0.0;
    let mut xs = vec![rep.train.observed.clone()];
    xs.extend(rep.validation.covariates.iter_rows().take(3).map(|r| r.to_vec()));
    for est in &estimators {
        for x in &xs {
            let curve = est.density_curve(&wide, x);
            if curve.iter().any(|&v| v < 0.0) {
                norm_err = f64::INFINITY;
            }
            norm_err = norm_err.max((trapezoid(&wide, &curve) - 1.0).abs());
        }
    }
    record(
        "normalization",
        norm_err <= 1e-3,
        format!("normalization error {norm_err:e}"),
    );

    let models = [
        BenchmarkModel::known_variance_mean(1.0, 20).unwrap(),
        BenchmarkModel::unknown_precision(0.5, 20).unwrap(),
        BenchmarkModel::mean_unknown_precision(1.0, 20).unwrap(),
        BenchmarkModel::default_mixture(5).unwrap(),
        BenchmarkModel::default_bivariate(0, 20).unwrap(),
    ];
    let mut sup: f64 = 0.0;
    for (m, model) in models.iter().enumerate() {
        for r in 0..3 {
            let mut rng = stream(derive_seed(SEED, 700 + 10 * m as u64 + r));
            let theta = model.sample_prior(&mut rng);
            let data = model.simulate(&theta, &mut rng).unwrap();
            sup = sup.max(oracle_sup_error(model, &data));
        }
    }
    record("oracles", sup <= 1e-4, format!("oracle sup error {sup:e}"));

    (ok, notes.join(", "))
}

fn relevance_truncation_trend() -> (bool, String) {
    // σ0 = 1, n = 20: θ | x̄ ~ N(20 x̄ / 21, 1 / 21)
    let sd = (1.0f64 / 21.0).sqrt();
    let density = |theta: f64, xbar: f64| {
        let z = (theta - 20.0 * xbar / 21.0) / sd;
        (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let profile = relevance_profile(density, (-3.0, 3.0), (-1.0, 1.0), &[4, 8, 16], 2001, 101);
    let gaps = profile.gaps();
    let decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    let noise = relevance_profile(
        |t: f64, _x: f64| density(t, 0.3),
        (-3.0, 3.0),
        (-1.0, 1.0),
        &[4, 8, 16],
        2001,
        51,
    );
    let noise_zero = noise.total.abs() < 1e-12 && noise.partial.iter().all(|p| p.1.abs() < 1e-12);
    (
        decreasing && noise_zero,
        format!(
            "r = {:.4}, gaps at I = 4, 8, 16: {:.4}, {:.4}, {:.4}; noise relevance zero: {noise_zero}",
            profile.total, gaps[0].1, gaps[1].1, gaps[2].1
        ),
    )
}
