#![allow(dead_code)]

use pue::oracle::{sample_from, DiscretePopulation};
use pue::{FeatureVector, LabeledSampleSet, LinearScorer};

/// Two equally likely points `x ∈ {0, 1}` sharing `p(y=1|x)` and `θ(e=1|x)`.
pub fn two_point(p_y1: f64, theta_e1: f64) -> DiscretePopulation {
    DiscretePopulation::new(
        vec![
            FeatureVector::new(vec![0.0]).unwrap(),
            FeatureVector::new(vec![1.0]).unwrap(),
        ],
        vec![0.5, 0.5],
        vec![p_y1; 2],
        vec![theta_e1; 2],
    )
    .unwrap()
}

/// Independent `D^PU` (w only) and `D^E` (e only) draws of `n` rows each.
pub fn pu_and_e(
    pop: &DiscretePopulation,
    n: usize,
    seed: u64,
) -> (LabeledSampleSet, LabeledSampleSet) {
    let pu = sample_from(pop, n, seed).unwrap().without_e();
    let e = sample_from(pop, n, seed ^ 0x5eed_0000_0000_0001)
        .unwrap()
        .without_w();
    (pu, e)
}

/// Per-point `(A, B)` with `A = q̂(w=1|x)` on `D^PU` and
/// `B = (#{E=0 at x} / |D^E|) / (#{x} / |D^PU|)`, so a round maps `f† ↦ A + f†·B`.
pub fn sample_map(pu: &LabeledSampleSet, e: &LabeledSampleSet, x: f64) -> (f64, f64) {
    let w = pu.w().unwrap();
    let at_pu: Vec<usize> = (0..pu.len()).filter(|&i| pu.row(i)[0] == x).collect();
    let pos = at_pu.iter().filter(|&&i| w[i]).count() as f64;
    let a = pos / at_pu.len() as f64;
    let ev = e.e().unwrap();
    let hidden = (0..e.len()).filter(|&i| e.row(i)[0] == x && !ev[i]).count() as f64;
    let b = (hidden / e.len() as f64) / (at_pu.len() as f64 / pu.len() as f64);
    (a, b)
}

/// Sample fixed point `A / (1 − B)` at `x`.
pub fn sample_fixed_point(pu: &LabeledSampleSet, e: &LabeledSampleSet, x: f64) -> f64 {
    let (a, b) = sample_map(pu, e, x);
    a / (1.0 - b)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// The scorer whose probabilities at `x = 0` and `x = 1` are `f0` and `f1`.
pub fn two_point_scorer(f0: f64, f1: f64) -> LinearScorer {
    let b = logit(f0);
    LinearScorer::new(vec![logit(f1) - b], b).unwrap()
}

pub fn prob_at(f: &LinearScorer, x: f64) -> f64 {
    f.score(&[x]).value()
}

use pue::risks::{RiskKind, RiskSpec, Roles};
use rand::Rng;

/// Random datasets for every role plus a scorer and proxy values.
pub struct Instance {
    pub spec: RiskSpec,
    pub pu: LabeledSampleSet,
    pub exposure: LabeledSampleSet,
    pub positive: LabeledSampleSet,
    pub unlabeled: LabeledSampleSet,
    pub sse: LabeledSampleSet,
    pub scorer: LinearScorer,
    pub dagger: Option<Vec<f64>>,
}

impl Instance {
    pub fn roles(&self) -> Roles<'_> {
        Roles {
            pu: Some(&self.pu),
            exposure: Some(&self.exposure),
            positive: Some(&self.positive),
            unlabeled: Some(&self.unlabeled),
            sse: Some(&self.sse),
        }
    }
}

fn random_rows<R: Rng>(rng: &mut R, n: usize, dim: usize) -> LabeledSampleSet {
    let feats: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
    LabeledSampleSet::new(dim, feats).unwrap()
}

fn observed<R: Rng>(rng: &mut R, n: usize, dim: usize) -> LabeledSampleSet {
    let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let e: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
    let w = y.iter().zip(&e).map(|(&a, &b)| a && b).collect();
    random_rows(rng, n, dim)
        .with_y_oracle(y)
        .unwrap()
        .with_e(e)
        .unwrap()
        .with_w(w)
        .unwrap()
}

pub fn random_instance<R: Rng>(kind: RiskKind, rng: &mut R) -> Instance {
    let dim = rng.gen_range(1..=5);
    let mut size = || rng.gen_range(8..40);
    let (a, b, c, d, e) = (size(), size(), size(), size(), size());
    let pu = observed(rng, a, dim).without_e();
    let exposure = observed(rng, b, dim).without_w();
    let positive = random_rows(rng, c, dim);
    let unlabeled = random_rows(rng, d, dim);
    let sse = loop {
        let s = observed(rng, e, dim);
        if s.e().unwrap().iter().any(|&v| v) {
            break s;
        }
    };
    let prior = kind.needs_class_prior().then(|| rng.gen_range(0.1..0.7));
    let mix = kind.needs_mix_weight().then(|| rng.gen_range(0.0..=1.0));
    let spec = RiskSpec::new(kind, prior, mix).unwrap();
    let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let scorer = LinearScorer::new(weights, rng.gen_range(-0.5..0.5)).unwrap();
    let dagger_len = match kind.dagger_role() {
        Some(pue::Role::Exposure) => Some(exposure.len()),
        Some(pue::Role::SemiSupervised) => Some(sse.len()),
        _ => None,
    };
    let dagger = dagger_len.map(|n| (0..n).map(|_| rng.gen_range(0.05..0.95)).collect());
    Instance {
        spec,
        pu,
        exposure,
        positive,
        unlabeled,
        sse,
        scorer,
        dagger,
    }
}

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖, 1e−8)` between the analytic gradient
/// and a central difference with step `h`, or `None` when a guard argument is
/// within 1e−4 of its kink.
pub fn gradient_error(inst: &Instance, h: f64) -> Option<f64> {
    let roles = inst.roles();
    let dagger = inst.dagger.as_deref();
    let base = inst.spec.evaluate(&inst.scorer, &roles, dagger).unwrap();
    if base.guard.is_some_and(|g| g.abs() < 1e-4) {
        return None;
    }
    let params = inst.scorer.params();
    let mut numeric = Vec::with_capacity(params.len());
    for j in 0..params.len() {
        let at = |delta: f64| {
            let mut p = params.clone();
            p[j] += delta;
            let f = LinearScorer::from_params(&p).unwrap();
            let r = inst.spec.evaluate(&f, &roles, dagger).unwrap();
            (r.value, r.guard)
        };
        let ((up, gu), (down, gd)) = (at(h), at(-h));
        if gu.zip(gd).is_some_and(|(a, b)| (a >= 0.0) != (b >= 0.0)) {
            return None;
        }
        numeric.push((up - down) / (2.0 * h));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = base
        .gradient
        .iter()
        .zip(&numeric)
        .map(|(a, b)| a - b)
        .collect();
    Some(norm(&diff) / norm(&base.gradient).max(norm(&numeric)).max(1e-8))
}

/// Path of a bundled dataset under the workspace `data/` directory.
pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// A random discrete population on `[0, 1]^dim` with exposure `theta(i)` at point `i`.
pub fn random_population<R: Rng>(
    rng: &mut R,
    points: usize,
    dim: usize,
    mut theta: impl FnMut(&[f64]) -> f64,
) -> DiscretePopulation {
    let xs: Vec<Vec<f64>> = (0..points)
        .map(|_| (0..dim).map(|_| rng.gen()).collect())
        .collect();
    let raw: Vec<f64> = (0..points).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut zeta: Vec<f64> = raw.iter().map(|z| z / total).collect();
    let tail: f64 = zeta[1..].iter().sum();
    zeta[0] = 1.0 - tail;
    let p_y1 = (0..points).map(|_| rng.gen_range(0.05..0.95)).collect();
    let theta_e1 = xs.iter().map(|x| theta(x)).collect();
    let points = xs
        .into_iter()
        .map(|x| FeatureVector::new(x).unwrap())
        .collect();
    DiscretePopulation::new(points, zeta, p_y1, theta_e1).unwrap()
}

/// Exact expected log loss of `f` under the population, with each point
/// weighted by `ζ(x)` or, when `exposure_weighted`, by `ζ(x)·θ(e=1|x)` renormalized.
pub fn population_risk(pop: &DiscretePopulation, f: &LinearScorer, exposure_weighted: bool) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, x) in pop.points().iter().enumerate() {
        let q = f.score(x.as_slice());
        let p = pop.p_y1()[i];
        let loss = p * pue::log_loss(q, true) + (1.0 - p) * pue::log_loss(q, false);
        let weight = pop.zeta()[i]
            * if exposure_weighted {
                pop.theta_e1()[i]
            } else {
                1.0
            };
        num += weight * loss;
        den += weight;
    }
    num / den
}

/// Mean and standard error of `risk_ads` over `reps` independent samples of `n` rows.
pub fn ads_monte_carlo(
    pop: &DiscretePopulation,
    f: &LinearScorer,
    n: usize,
    reps: usize,
    seed: u64,
) -> (f64, f64) {
    let vals: Vec<f64> = (0..reps as u64)
        .map(|r| {
            let s = sample_from(pop, n, seed.wrapping_mul(1_000_003).wrapping_add(r)).unwrap();
            pue::risks::risk_ads(f, &s).unwrap().value
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    (mean, (var / reps as f64).sqrt())
}
