mod common;

use common::*;
use pue::datagen::{split_for_problem, synthesize_observations, ExposureSpec, Problem, SplitSpec};
use pue::harness::{evaluate, Mode};
use pue::risks::{RiskKind, RiskSpec, Roles};
use pue::train::{alternate_round, minimize, train_alternate, train_direct};
use pue::{
    train_adpue_alternate, train_adpue_direct, train_variant, LabeledSampleSet, LinearScorer,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn two_point_config(rounds: usize, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 8.0,
        epochs,
        rounds,
        ..TrainConfig::default()
    }
}

#[test]
fn alternate_reaches_sample_fixed_point() {
    let pop = two_point(0.6, 0.5);
    let (pu, e) = pu_and_e(&pop, 20_000, 11);
    let (f, trace) = train_adpue_alternate(&pu, &e, &two_point_config(20, 150)).unwrap();
    assert_eq!(trace.epochs.len(), 20 * 150);
    for x in [0.0, 1.0] {
        let target = sample_fixed_point(&pu, &e, x);
        let got = prob_at(&f, x);
        assert!(
            (got - target).abs() < 1e-4,
            "x = {x}: {got} vs sample fixed point {target}"
        );
        assert!((got - 0.6).abs() < 0.03, "x = {x}: {got}");
    }
}

#[test]
fn rounds_contract_at_the_hidden_rate() {
    let pop = two_point(0.6, 0.5);
    let (pu, e) = pu_and_e(&pop, 20_000, 12);
    let (_, trace) = train_adpue_alternate(&pu, &e, &two_point_config(8, 300)).unwrap();
    for x in [0.0, 1.0] {
        let (_, b) = sample_map(&pu, &e, x);
        let limit = sample_fixed_point(&pu, &e, x);
        let errs: Vec<f64> = trace
            .snapshots
            .iter()
            .map(|s| (prob_at(s, x) - limit).abs())
            .collect();
        for t in 1..6 {
            let ratio = errs[t] / errs[t - 1];
            assert!(
                (ratio - b).abs() <= 0.25 * b,
                "x = {x}, round {t}: ratio {ratio}, rate {b}"
            );
        }
    }
}

#[test]
fn population_rate_matches_theta() {
    let pop = two_point(0.6, 0.5);
    let (pu, e) = pu_and_e(&pop, 20_000, 13);
    for x in [0.0, 1.0] {
        let (_, b) = sample_map(&pu, &e, x);
        assert!((b - 0.5).abs() < 0.05, "x = {x}: {b}");
    }
}

#[test]
fn direct_reaches_limit_within_budget() {
    let pop = two_point(0.6, 0.5);
    let (pu, e) = pu_and_e(&pop, 20_000, 14);
    let cfg = TrainConfig {
        learning_rate: 8.0,
        epochs: 100,
        ..TrainConfig::default()
    };
    let (f, trace) = train_adpue_direct(&pu, &e, &cfg).unwrap();
    assert_eq!(trace.epochs.len(), 100);
    for x in [0.0, 1.0] {
        assert!(
            (prob_at(&f, x) - 0.6).abs() < 0.02,
            "x = {x}: {}",
            prob_at(&f, x)
        );
    }
}

#[test]
fn warm_start_at_fixed_point_stays_put() {
    let pop = two_point(0.6, 0.5);
    let (pu, e) = pu_and_e(&pop, 10_000, 15);
    let f = two_point_scorer(
        sample_fixed_point(&pu, &e, 0.0),
        sample_fixed_point(&pu, &e, 1.0),
    );
    let spec = RiskSpec::plain(RiskKind::AdpueAlternate).unwrap();
    let roles = Roles {
        pu: Some(&pu),
        exposure: Some(&e),
        ..Roles::default()
    };
    let (next, _) = alternate_round(&spec, &roles, &f, &two_point_config(1, 50)).unwrap();
    for (a, b) in next.params().iter().zip(f.params()) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn full_exposure_is_plain_pu_training() {
    let pop = two_point(0.6, 1.0);
    let (pu, e) = pu_and_e(&pop, 2_000, 16);
    let cfg = two_point_config(3, 80);
    let (f, trace) = train_adpue_alternate(&pu, &e, &cfg).unwrap();
    let logit_spec = RiskSpec::plain(RiskKind::Logit).unwrap();
    let roles = Roles {
        pu: Some(&pu),
        ..Roles::default()
    };
    let (g, _) = minimize(
        &logit_spec,
        &roles,
        None,
        &TrainConfig {
            rounds: 1,
            ..cfg.clone()
        },
        None,
    )
    .unwrap();
    let first = &trace.snapshots[0];
    for (a, b) in first.params().iter().zip(g.params()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    let end_of = |r: usize| trace.epochs[(r + 1) * cfg.epochs - 1].risk;
    assert!((end_of(2) - end_of(0)).abs() < 1e-9);
    assert!(f
        .params()
        .iter()
        .zip(first.params())
        .all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn training_is_deterministic() {
    let pop = two_point(0.6, 0.5);
    let (pu, e) = pu_and_e(&pop, 3_000, 17);
    let cfg = two_point_config(3, 40);
    assert_eq!(
        train_adpue_alternate(&pu, &e, &cfg).unwrap(),
        train_adpue_alternate(&pu, &e, &cfg).unwrap()
    );
    assert_eq!(
        train_adpue_direct(&pu, &e, &cfg).unwrap(),
        train_adpue_direct(&pu, &e, &cfg).unwrap()
    );
}

#[test]
fn risk_is_monotone_within_each_round() {
    let pop = two_point(0.6, 0.5);
    let (pu, e) = pu_and_e(&pop, 3_000, 18);
    let cfg = TrainConfig {
        learning_rate: 100.0,
        epochs: 60,
        rounds: 4,
        ..TrainConfig::default()
    };
    let (_, trace) = train_adpue_alternate(&pu, &e, &cfg).unwrap();
    for w in trace.epochs.windows(2) {
        if w[0].round == w[1].round {
            assert!(w[1].risk <= w[0].risk, "{:?} -> {:?}", w[0], w[1]);
        }
    }
}

fn semi_synthetic(n: usize, dim: usize, seed: u64) -> LabeledSampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_true: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let z: f64 = x.iter().zip(&w_true).map(|(a, b)| a * b).sum::<f64>()
            - w_true.iter().sum::<f64>() / 2.0;
        y.push(rng.gen::<f64>() < 1.0 / (1.0 + (-4.0 * z).exp()));
        rows.push(x);
    }
    let set = LabeledSampleSet::from_rows(dim, &rows)
        .unwrap()
        .with_y_oracle(y)
        .unwrap();
    synthesize_observations(&set, &ExposureSpec::default(), 0.9, seed + 1).unwrap()
}

#[test]
fn dadss_at_zero_weight_matches_ads() {
    let data = semi_synthetic(600, 14, 3);
    let split = split_for_problem(
        &data,
        Problem::Sse,
        &SplitSpec {
            split_ratio: 0.5,
            test_count: 100,
        },
        4,
    )
    .unwrap();
    let cfg = TrainConfig {
        learning_rate: 2.0,
        epochs: 3000,
        rounds: 3,
        l2_penalty: 0.05,
        ..TrainConfig::default()
    };
    let ads = train_variant(
        &RiskSpec::plain(RiskKind::Ads).unwrap(),
        &split.roles(),
        &cfg,
    )
    .unwrap()
    .0;
    let dadss = train_variant(
        &RiskSpec::new(RiskKind::Dadss, None, Some(0.0)).unwrap(),
        &split.roles(),
        &cfg,
    )
    .unwrap()
    .0;
    for (a, b) in ads.params().iter().zip(dadss.params()) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn nnpu_tracks_upu_on_gaussian_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (pos, neg) = (
        Normal::new(1.0, 1.0).unwrap(),
        Normal::new(-1.0, 1.0).unwrap(),
    );
    let mut draw = |n: usize| {
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n);
        for _ in 0..n {
            let label = rng.gen_bool(0.5);
            let d = if label { pos } else { neg };
            rows.push([d.sample(&mut rng), d.sample(&mut rng)]);
            y.push(label);
            e.push(rng.gen_bool(0.6));
        }
        let w: Vec<bool> = y.iter().zip(&e).map(|(&a, &b)| a && b).collect();
        LabeledSampleSet::from_rows(2, &rows)
            .unwrap()
            .with_y_oracle(y)
            .unwrap()
            .with_e(e)
            .unwrap()
            .with_w(w)
            .unwrap()
    };
    let train = draw(4000).without_e();
    let test = draw(2000).without_w().without_e();
    let prior = 0.5 * 0.6;
    let roles = Roles {
        pu: Some(&train),
        ..Roles::default()
    };
    let cfg = TrainConfig {
        learning_rate: 1.0,
        epochs: 300,
        ..TrainConfig::default()
    };
    let acc = |kind| {
        let spec = RiskSpec::new(kind, Some(prior), None).unwrap();
        let (f, _) = train_variant(&spec, &roles, &cfg).unwrap();
        evaluate(&f, &test, Mode::Inductive).unwrap().accuracy
    };
    let (u, n) = (acc(RiskKind::Upu), acc(RiskKind::Nnpu));
    assert!((u - n).abs() <= 0.05, "UPU {u}, NNPU {n}");
}

#[test]
fn alternate_and_direct_agree_on_a_benchmark_split() {
    let data = semi_synthetic(1500, 14, 21);
    let split = split_for_problem(
        &data,
        Problem::Pue,
        &SplitSpec {
            split_ratio: 0.5,
            test_count: 300,
        },
        22,
    )
    .unwrap();
    let cfg = TrainConfig {
        learning_rate: 1.0,
        epochs: 300,
        rounds: 8,
        ..TrainConfig::default()
    };
    let alt = train_alternate(
        &RiskSpec::plain(RiskKind::AdpueAlternate).unwrap(),
        &split.roles(),
        &cfg,
    )
    .unwrap()
    .0;
    let dir = train_direct(
        &RiskSpec::plain(RiskKind::AdpueDirect).unwrap(),
        &split.roles(),
        &cfg,
    )
    .unwrap()
    .0;
    let a = evaluate(&alt, &split.test, Mode::Inductive)
        .unwrap()
        .accuracy;
    let d = evaluate(&dir, &split.test, Mode::Inductive)
        .unwrap()
        .accuracy;
    assert!((a - d).abs() <= 0.05, "alternate {a}, direct {d}");
}

#[test]
fn zero_weights_start_for_plain_minimize() {
    let d = LabeledSampleSet::from_rows(1, &[[0.0]])
        .unwrap()
        .with_w(vec![true])
        .unwrap();
    let roles = Roles {
        pu: Some(&d),
        ..Roles::default()
    };
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let (f, trace) = minimize(
        &RiskSpec::plain(RiskKind::Logit).unwrap(),
        &roles,
        None,
        &cfg,
        None,
    )
    .unwrap();
    assert_eq!(trace.epochs.len(), 1);
    assert_eq!(f.weights(), &[0.0]);
    assert!(f.intercept() > 0.0);
    let _ = LinearScorer::zeros(1);
}
