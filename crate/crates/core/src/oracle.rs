//! Exact population-level quantities on finite feature spaces.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, LabeledSampleSet};
use crate::error::{PueError, Result};
use crate::loss::{log_loss, Probability, EPSILON};

/// A distribution over finitely many feature points with per-point
/// conditionals `p(y = 1 | x)` and `θ(e = 1 | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPopulation", into = "RawPopulation")]
pub struct DiscretePopulation {
    points: Vec<FeatureVector>,
    zeta: Vec<f64>,
    p_y1: Vec<f64>,
    theta_e1: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPopulation {
    points: Vec<FeatureVector>,
    zeta: Vec<f64>,
    p_y1: Vec<f64>,
    theta_e1: Vec<f64>,
}

impl TryFrom<RawPopulation> for DiscretePopulation {
    type Error = PueError;

    fn try_from(r: RawPopulation) -> Result<Self> {
        DiscretePopulation::new(r.points, r.zeta, r.p_y1, r.theta_e1)
    }
}

impl From<DiscretePopulation> for RawPopulation {
    fn from(p: DiscretePopulation) -> Self {
        RawPopulation {
            points: p.points,
            zeta: p.zeta,
            p_y1: p.p_y1,
            theta_e1: p.theta_e1,
        }
    }
}

impl DiscretePopulation {
    pub fn new(
        points: Vec<FeatureVector>,
        zeta: Vec<f64>,
        p_y1: Vec<f64>,
        theta_e1: Vec<f64>,
    ) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(PueError::EmptySet("population has no points".into()));
        }
        if zeta.len() != n || p_y1.len() != n || theta_e1.len() != n {
            return Err(PueError::InvalidData(format!(
                "{n} points but {} masses, {} p(y=1|x) and {} θ(e=1|x) values",
                zeta.len(),
                p_y1.len(),
                theta_e1.len()
            )));
        }
        let dim = points[0].dim();
        if dim == 0 || points.iter().any(|p| p.dim() != dim) {
            return Err(PueError::InvalidData(
                "points must share a positive dimension".into(),
            ));
        }
        if zeta.iter().any(|&z| !(z >= 0.0)) {
            return Err(PueError::InvalidData(
                "point masses must be nonnegative".into(),
            ));
        }
        let total: f64 = zeta.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PueError::InvalidData(format!(
                "point masses sum to {total}, not 1"
            )));
        }
        if let Some(p) = p_y1.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
            return Err(PueError::InvalidData(format!(
                "p(y=1|x) = {p} outside [0, 1]"
            )));
        }
        if let Some(t) = theta_e1.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
            return Err(PueError::InvalidData(format!(
                "θ(e=1|x) = {t} outside (0, 1]"
            )));
        }
        Ok(DiscretePopulation {
            points,
            zeta,
            p_y1,
            theta_e1,
        })
    }

    /// Reads a `[population]` table from a TOML document.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            population: DiscretePopulation,
        }
        let doc: Doc = toml::from_str(s).map_err(|e| PueError::Config(e.to_string()))?;
        Ok(doc.population)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[FeatureVector] {
        &self.points
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn p_y1(&self) -> &[f64] {
        &self.p_y1
    }

    pub fn theta_e1(&self) -> &[f64] {
        &self.theta_e1
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(PueError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// `q(w = 1 | x) = p(y = 1 | x) · θ(e = 1 | x)` at point `i`.
pub fn q_w1(pop: &DiscretePopulation, i: usize) -> Result<f64> {
    pop.check_index(i)?;
    Ok(pop.p_y1[i] * pop.theta_e1[i])
}

/// Marginal `q(w = 1) = Σ ζ(x) q(w = 1 | x)`.
pub fn q_w1_marginal(pop: &DiscretePopulation) -> f64 {
    (0..pop.len())
        .map(|i| pop.zeta[i] * pop.p_y1[i] * pop.theta_e1[i])
        .sum()
}

/// Largest `|p − (q + p·θ(e = 0|x))|` over the support.
pub fn identification_check(pop: &DiscretePopulation) -> f64 {
    (0..pop.len())
        .map(|i| {
            let p = pop.p_y1[i];
            let t = pop.theta_e1[i];
            (p - (p * t + p * (1.0 - t))).abs()
        })
        .fold(0.0, f64::max)
}

/// `a·ℓ(β, 1) + (1 − a)·ℓ(β, 0)`.
pub fn pointwise_objective(a: f64, beta: f64) -> f64 {
    let b = Probability::clamped(beta);
    a * log_loss(b, true) + (1.0 - a) * log_loss(b, false)
}

/// Grid minimizer of [`pointwise_objective`] over `(ε, 1 − ε)`: a scan at step
/// 1e−3 followed by a scan at step 1e−6 within 2e−3 of the coarse winner.
pub fn grid_minimize(a: f64) -> f64 {
    let scan = |lo: f64, hi: f64, step: f64| {
        let n = ((hi - lo) / step).floor() as usize;
        (0..=n)
            .map(|k| lo + k as f64 * step)
            .map(|b| (b, pointwise_objective(a, b)))
            .fold(
                (lo, f64::INFINITY),
                |best, c| if c.1 < best.1 { c } else { best },
            )
            .0
    };
    let coarse = scan(1e-3, 1.0 - 1e-3, 1e-3);
    let lo = (coarse - 2e-3).max(EPSILON);
    let hi = (coarse + 2e-3).min(1.0 - EPSILON);
    scan(lo, hi, 1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaMinimizer {
    pub value: f64,
    /// The stationary point fell outside `(ε, 1 − ε)` and was clamped.
    pub boundary: bool,
}

/// Minimizer `q1 + f†·θ(e = 0|x)` of the pointwise pseudo-risk objective.
pub fn lemma_minimizer(q1: f64, f_dagger: f64, theta_e0: f64) -> Result<LemmaMinimizer> {
    for (name, v) in [("q1", q1), ("f†", f_dagger), ("θ(e=0|x)", theta_e0)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(PueError::Parameter(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let a = q1 + f_dagger * theta_e0;
    if a > EPSILON && a < 1.0 - EPSILON {
        return Ok(LemmaMinimizer {
            value: a,
            boundary: false,
        });
    }
    let value = a.clamp(EPSILON, 1.0 - EPSILON);
    log::warn!("stationary point {a} lies outside (ε, 1 − ε); clamped to {value}");
    Ok(LemmaMinimizer {
        value,
        boundary: true,
    })
}

/// `[f_0, …, f_T]` with `f_t = q1 + f_{t−1}·θ0`.
pub fn theorem_recursion(q1: f64, theta_e0: f64, f0: f64, t: usize) -> Result<Vec<f64>> {
    check_recursion(q1, theta_e0, f0)?;
    let mut out = Vec::with_capacity(t + 1);
    out.push(f0);
    for _ in 0..t {
        let prev = *out.last().unwrap();
        out.push(q1 + prev * theta_e0);
    }
    Ok(out)
}

/// `q1 (1 − θ0^T) / (1 − θ0) + f0 θ0^T`.
pub fn theorem_closed_form(q1: f64, theta_e0: f64, f0: f64, t: usize) -> Result<f64> {
    check_recursion(q1, theta_e0, f0)?;
    let pow = theta_e0.powi(t as i32);
    Ok(q1 * (1.0 - pow) / (1.0 - theta_e0) + f0 * pow)
}

/// `q1 / (1 − θ0)`, the fixed point of the recursion.
pub fn theorem_limit(q1: f64, theta_e0: f64) -> Result<f64> {
    check_recursion(q1, theta_e0, 0.0)?;
    Ok(q1 / (1.0 - theta_e0))
}

fn check_recursion(q1: f64, theta_e0: f64, f0: f64) -> Result<()> {
    if theta_e0 == 1.0 {
        return Err(PueError::Divergence(
            "θ(e=0|x) = 1 leaves nothing exposed".into(),
        ));
    }
    if !(0.0..1.0).contains(&theta_e0) {
        return Err(PueError::Parameter(format!(
            "θ(e=0|x) = {theta_e0} outside [0, 1)"
        )));
    }
    for (name, v) in [("q1", q1), ("f0", f0)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(PueError::Parameter(format!("{name} = {v} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Accuracy of the Bayes classifier `1[p(y=1|x) ≥ 1/2]`.
pub fn bayes_accuracy(pop: &DiscretePopulation) -> f64 {
    (0..pop.len())
        .map(|i| pop.zeta[i] * pop.p_y1[i].max(1.0 - pop.p_y1[i]))
        .sum()
}

/// Draws `n` i.i.d. rows with `y_oracle`, `e` and `w = e·y` columns.
pub fn sample_from(pop: &DiscretePopulation, n: usize, seed: u64) -> Result<LabeledSampleSet> {
    if n == 0 {
        return Err(PueError::EmptySet("cannot draw zero rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(&pop.zeta).map_err(|e| PueError::InvalidData(e.to_string()))?;
    let dim = pop.dim();
    let mut features = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for _ in 0..n {
        let i = pick.sample(&mut rng);
        features.extend_from_slice(pop.points[i].as_slice());
        y.push(rng.gen_bool(pop.p_y1[i]));
        e.push(rng.gen_bool(pop.theta_e1[i]));
    }
    let w = y.iter().zip(&e).map(|(&y, &e)| y && e).collect();
    LabeledSampleSet::new(dim, features)?
        .with_y_oracle(y)?
        .with_e(e)?
        .with_w(w)
}

/// Largest residuals found by [`verification_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub instances: usize,
    /// `|lemma_minimizer − grid_minimize|` over triples with interior stationary points.
    pub lemma: f64,
    /// `| |f_t − limit| − |f_0 − limit|·θ0^t |` over every step of every instance.
    pub contraction: f64,
    /// `|recursion f_T − closed form|`.
    pub closed_form: f64,
    /// [`identification_check`] on random 100-point populations.
    pub identification: f64,
}

/// Checks the closed-form minimizer, the recursion and the identification
/// identity on `instances` random draws each.
pub fn verification_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        instances,
        lemma: 0.0,
        contraction: 0.0,
        closed_form: 0.0,
        identification: 0.0,
    };
    let mut done = 0;
    while done < instances {
        let (q1, fd, t0): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let a = q1 + fd * t0;
        if !(a > 0.01 && a < 0.99) {
            continue;
        }
        let m = lemma_minimizer(q1, fd, t0)?;
        report.lemma = report.lemma.max((m.value - grid_minimize(a)).abs());
        done += 1;
    }
    for _ in 0..instances {
        let p: f64 = rng.gen();
        let theta1: f64 = rng.gen_range(0.05..=1.0);
        let (q1, t0) = (p * theta1, 1.0 - theta1);
        let f0: f64 = rng.gen();
        let steps = rng.gen_range(1..=60);
        let seq = theorem_recursion(q1, t0, f0, steps)?;
        let limit = theorem_limit(q1, t0)?;
        for (t, f) in seq.iter().enumerate() {
            let expect = (f0 - limit).abs() * t0.powi(t as i32);
            report.contraction = report.contraction.max(((f - limit).abs() - expect).abs());
        }
        let closed = theorem_closed_form(q1, t0, f0, steps)?;
        report.closed_form = report.closed_form.max((seq[steps] - closed).abs());
    }
    for _ in 0..instances.div_ceil(10) {
        let n = 100;
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut zeta: Vec<f64> = raw.iter().map(|z| z / total).collect();
        let head: f64 = zeta[1..].iter().sum();
        zeta[0] = 1.0 - head;
        let points = (0..n)
            .map(|i| FeatureVector::new(vec![i as f64]))
            .collect::<Result<Vec<_>>>()?;
        let p_y1 = (0..n).map(|_| rng.gen()).collect();
        let theta = (0..n).map(|_| rng.gen_range(0.01..=1.0)).collect();
        let pop = DiscretePopulation::new(points, zeta, p_y1, theta)?;
        report.identification = report.identification.max(identification_check(&pop));
    }
    Ok(report)
}
