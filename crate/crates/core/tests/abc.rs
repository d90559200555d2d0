mod common;

use abc_cde::abc::{pool_size, split_train_validation, TrainingSet};
use abc_cde::models::BenchmarkModel;
use abc_cde::rng::{derive_seed, stream};
use abc_cde::summaries::{Standardizer, Statistic, SummarySpec};
use abc_cde::{DistanceFn, Error, RejectionSampler, SamplingTarget, Simulator};
use proptest::prelude::*;

fn scenario_one() -> (BenchmarkModel<f64>, SummarySpec) {
    (
        BenchmarkModel::known_variance_mean(1.0, 20).unwrap(),
        SummarySpec::new(vec![Statistic::Mean, Statistic::Sd], 0).unwrap(),
    )
}

fn sample(target: SamplingTarget<f64>, seed: u64) -> (TrainingSet<f64>, BenchmarkModel<f64>) {
    let (model, spec) = scenario_one();
    let set = {
        let sim = Simulator {
            model: &model,
            summaries: &spec,
        };
        let data = model.standard_normal_dataset(&mut stream(99));
        let observed = sim.observe(&data, 99);
        RejectionSampler::default()
            .sample(
                &sim,
                &observed,
                &DistanceFn::on_coordinates(vec![0]).unwrap(),
                target,
                seed,
            )
            .unwrap()
    };
    (set, model)
}

fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn rate_mode_epsilon_is_the_exact_order_statistic() {
    let (model, spec) = scenario_one();
    let sim = Simulator {
        model: &model,
        summaries: &spec,
    };
    let data = model.standard_normal_dataset(&mut stream(1));
    let observed = sim.observe(&data, 1);
    let distance = DistanceFn::euclidean();
    let (b, rate, seed) = (300, 0.05, 17);
    let set = RejectionSampler::default()
        .sample(&sim, &observed, &distance, SamplingTarget::Rate { rate, b }, seed)
        .unwrap();
    let n = pool_size(rate, b);
    assert_eq!(n, 6000);
    assert_eq!(set.n_proposed, n);
    assert_eq!((set.acceptance_rate * n as f64).round() as usize, b);

    // independent recomputation from the same proposal stream
    let (_, pool) = sim.pool(n, derive_seed(seed, 0)).unwrap();
    let st = Standardizer::fit(&pool).unwrap();
    let x_o = st.apply(&observed.values);
    let mut d: Vec<f64> = pool
        .iter_rows()
        .map(|r| distance.distance(&st.apply(r), &x_o))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(set.epsilon, d[b - 1]);
    assert_eq!(set.len(), b);
    assert!(set.distances.iter().all(|&x| x <= set.epsilon));
}

#[test]
fn paper_rate_generates_hundred_thousand_proposals() {
    assert_eq!(pool_size(0.01, 1000), 100_000);
    assert_eq!(pool_size(1.0, 1000), 1000);
    assert_eq!(pool_size(0.3, 10), 34);
}

#[test]
fn tolerance_mode_accepts_strictly_inside() {
    let (set, _) = sample(SamplingTarget::Epsilon { epsilon: 0.2, b: 500 }, 5);
    assert_eq!(set.len(), 500);
    assert!(set.distances.iter().all(|&d| d < 0.2));
    assert_eq!(set.epsilon, 0.2);
}

#[test]
fn conflicting_targets_are_rejected() {
    assert!(matches!(
        SamplingTarget::<f64>::from_parts(Some(0.1), Some(0.5), 100),
        Err(Error::Config(_))
    ));
}

#[test]
fn tiny_tolerance_exhausts_budget() {
    let (model, spec) = scenario_one();
    let sim = Simulator {
        model: &model,
        summaries: &spec,
    };
    let observed = sim.observe(&model.standard_normal_dataset(&mut stream(2)), 2);
    let sampler = RejectionSampler {
        proposal_cap: 20_000,
        pilot_size: 1000,
    };
    let r = sampler.sample(
        &sim,
        &observed,
        &DistanceFn::euclidean(),
        SamplingTarget::Epsilon { epsilon: 1e-6, b: 100 },
        3,
    );
    assert!(matches!(r, Err(Error::BudgetExhausted { cap: 20_000, .. })));
}

#[test]
fn accepted_theta_moves_from_prior_to_posterior() {
    let b = 2000;
    let targets = [
        SamplingTarget::Rate { rate: 1.0, b },
        SamplingTarget::Epsilon { epsilon: 1.0, b },
        SamplingTarget::Epsilon { epsilon: 0.1, b },
        SamplingTarget::Epsilon { epsilon: 0.01, b },
    ];
    let mut ks = Vec::new();
    let mut last = None;
    for (i, t) in targets.into_iter().enumerate() {
        let (set, model) = sample(t, derive_seed(40, i as u64));
        let data = model.standard_normal_dataset(&mut stream(99));
        let oracle = model.true_posterior(&data).unwrap();
        ks.push(ks_distance(&set.thetas, |x| oracle.shape().cdf(x)));
        last = Some((set, oracle));
    }
    // KS fluctuation at B = 2000 is about 1.36 / sqrt(B)
    let noise = 1.36 / (b as f64).sqrt();
    assert!(ks.windows(2).all(|w| w[1] <= w[0] + 2.0 * noise), "{ks:?}");
    assert!(ks[3] < ks[0] / 4.0, "{ks:?}");

    let (set, oracle) = last.unwrap();
    let m = set.thetas.iter().sum::<f64>() / b as f64;
    let se = (common::variance(&set.thetas) / b as f64).sqrt();
    assert!((m - oracle.mean()).abs() < 3.0 * se, "{m} vs {}", oracle.mean());
}

#[test]
fn rate_one_is_the_prior_predictive_sample() {
    let (set, _) = sample(SamplingTarget::Rate { rate: 1.0, b: 1000 }, 8);
    assert_eq!(set.n_proposed, 1000);
    assert_eq!(set.len(), 1000);
    assert!(set.epsilon.is_infinite());
}

#[test]
fn sampling_is_independent_of_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample(SamplingTarget::Rate { rate: 0.1, b: 1000 }, 21).0)
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn split_halves_and_is_reproducible() {
    let (set, _) = sample(SamplingTarget::Rate { rate: 1.0, b: 1000 }, 9);
    let (train, val) = split_train_validation(&set, 0.5, 4).unwrap();
    assert_eq!((train.len(), val.len()), (500, 500));
    assert_eq!(val.standardizer, set.standardizer);
    let (train2, _) = split_train_validation(&set, 0.5, 4).unwrap();
    assert_eq!(train, train2);
    assert!(split_train_validation(&set, 0.0, 4).is_err());
    assert!(split_train_validation(&set.subset(&[0, 1, 2]), 0.5, 4).is_err());
}

#[test]
fn csv_round_trip_preserves_pairs() {
    let (set, _) = sample(SamplingTarget::Rate { rate: 0.5, b: 50 }, 10);
    let mut buf = Vec::new();
    set.write_csv(&mut buf).unwrap();
    let header = String::from_utf8(buf.clone()).unwrap();
    assert!(header.starts_with("theta,x_1,x_2\n"));
    let back = TrainingSet::read_csv(buf.as_slice(), set.metadata()).unwrap();
    assert_eq!(back.thetas, set.thetas);
    assert_eq!(back.covariates, set.covariates);
    assert_eq!(back.epsilon, set.epsilon);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_is_a_partition(fraction in 0.1f64..0.9, seed in any::<u64>()) {
        let set = common::synthetic_set(
            (0..40).map(|i| i as f64).collect(),
            (0..40).map(|i| vec![i as f64 * 0.5]).collect(),
            vec![0.0],
        );
        let (train, val) = split_train_validation(&set, fraction, seed).unwrap();
        let mut all: Vec<f64> = train.thetas.iter().chain(&val.thetas).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(all, set.thetas.clone());
    }

    #[test]
    fn distance_is_a_semimetric(
        a in prop::collection::vec(-10.0f64..10.0, 3),
        b in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        let d = DistanceFn::euclidean();
        prop_assert_eq!(d.distance(&a, &a), 0.0);
        prop_assert_eq!(d.distance(&a, &b), d.distance(&b, &a));
        prop_assert!(d.distance(&a, &b) >= 0.0);
    }
}
