//! Full-batch gradient descent over risk functionals, the alternate
//! proxy-refresh loop, and the direct self-referential variant.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSampleSet;
use crate::error::{PueError, Result};
use crate::loss::EPSILON;
use crate::risks::{RiskEval, RiskKind, RiskSpec, Roles};
use crate::scorer::LinearScorer;

/// How many times a step is halved before the optimizer gives up.
pub const MAX_HALVINGS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Outer rounds of the alternate loop.
    pub rounds: usize,
    /// Constant proxy probability used before the first round.
    pub init_guess: f64,
    /// Coefficient of `½‖w‖²` on the weights (the intercept is not penalized).
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            rounds: 10,
            init_guess: 0.5,
            l2_penalty: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PueError::Parameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(PueError::Parameter("epochs must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(PueError::Parameter("rounds must be at least 1".into()));
        }
        if !(self.init_guess > EPSILON && self.init_guess < 1.0 - EPSILON) {
            return Err(PueError::Parameter(format!(
                "initial guess {} must lie in (ε, 1 − ε)",
                self.init_guess
            )));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(PueError::Parameter(format!(
                "l2 penalty {} must be nonnegative",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub round: usize,
    pub epoch: usize,
    /// Objective value after the epoch's step.
    pub risk: f64,
    pub clipped: bool,
    /// Accuracy against `y_oracle` over every training set that carries it.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// Scorer at the end of each round.
    pub snapshots: Vec<LinearScorer>,
}

impl TrainTrace {
    pub fn final_risk(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.risk)
    }

    pub fn clipped_epochs(&self) -> usize {
        self.epochs.iter().filter(|r| r.clipped).count()
    }

    fn extend(&mut self, other: TrainTrace, round: usize) {
        self.epochs.extend(other.epochs.into_iter().map(|mut r| {
            r.round = round;
            r
        }));
        self.snapshots.extend(other.snapshots);
    }
}

/// Where the proxy probabilities for one optimization come from.
#[derive(Clone, Copy)]
enum Dagger<'a> {
    None,
    Frozen(&'a [f64]),
    /// Re-read from the current scorer at the start of every epoch.
    Live(&'a LabeledSampleSet),
}

fn objective(
    spec: &RiskSpec,
    f: &LinearScorer,
    roles: &Roles<'_>,
    dagger: Option<&[f64]>,
    l2: f64,
    want_grad: bool,
) -> Result<RiskEval> {
    let mut ev = spec.eval(f, roles, dagger, want_grad)?;
    if l2 > 0.0 {
        let w = f.weights();
        ev.value += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
        for (g, v) in ev.gradient.iter_mut().zip(w) {
            *g += l2 * v;
        }
    }
    Ok(ev)
}

fn train_accuracy(f: &LinearScorer, roles: &Roles<'_>) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (_, set) in roles.present() {
        if let Some(y) = set.y_oracle() {
            hits += set
                .rows()
                .zip(y)
                .filter(|(x, &y)| f.predict(x) == y)
                .count();
            total += y.len();
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

fn check_roles(roles: &Roles<'_>, dim: usize) -> Result<()> {
    if let Some((role, s)) = roles.present().find(|(_, s)| s.dim() != dim) {
        return Err(PueError::Parameter(format!(
            "dataset {role} has dimension {}, expected {dim}",
            s.dim()
        )));
    }
    Ok(())
}

fn training_dim(roles: &Roles<'_>) -> Result<usize> {
    roles
        .present()
        .map(|(_, s)| s.dim())
        .next()
        .ok_or_else(|| PueError::Parameter("no training datasets supplied".into()))
}

fn descend(
    spec: &RiskSpec,
    roles: &Roles<'_>,
    dagger: Dagger<'_>,
    config: &TrainConfig,
    start: LinearScorer,
) -> Result<(LinearScorer, TrainTrace)> {
    config.validate()?;
    check_roles(roles, start.dim())?;
    let mut scorer = start;
    let mut trace = TrainTrace::default();
    let mut live_buf;
    let reuse = !matches!(dagger, Dagger::Live(_));
    let mut carried: Option<RiskEval> = None;
    for epoch in 0..config.epochs {
        let frozen: Option<&[f64]> = match dagger {
            Dagger::None => None,
            Dagger::Frozen(v) => Some(v),
            Dagger::Live(set) => {
                live_buf = scorer.probabilities(set);
                Some(&live_buf)
            }
        };
        let ev = match carried.take() {
            Some(ev) => ev,
            None => objective(spec, &scorer, roles, frozen, config.l2_penalty, true)?,
        };
        if !ev.value.is_finite() {
            return Err(PueError::Evaluation(format!(
                "risk became {} at epoch {epoch}",
                ev.value
            )));
        }
        let params = scorer.params();
        let mut accepted = None;
        for j in 0..=MAX_HALVINGS {
            let lr = config.learning_rate * 0.5f64.powi(j as i32);
            let cand: Vec<f64> = params
                .iter()
                .zip(&ev.gradient)
                .map(|(p, g)| p - lr * g)
                .collect();
            let Ok(cand) = LinearScorer::from_params(&cand) else {
                continue;
            };
            let next = objective(spec, &cand, roles, frozen, config.l2_penalty, reuse)?;
            if next.value <= ev.value {
                accepted = Some((cand, next));
                break;
            }
        }
        match accepted {
            Some((cand, next)) => {
                scorer = cand;
                trace.epochs.push(EpochRecord {
                    round: 0,
                    epoch,
                    risk: next.value,
                    clipped: next.clipped,
                    accuracy: train_accuracy(&scorer, roles),
                });
                if reuse {
                    carried = Some(next);
                }
            }
            None => {
                log::debug!("no descent step found at epoch {epoch}; stopping early");
                let last = EpochRecord {
                    round: 0,
                    epoch,
                    risk: ev.value,
                    clipped: ev.clipped,
                    accuracy: train_accuracy(&scorer, roles),
                };
                for e in epoch..config.epochs {
                    trace.epochs.push(EpochRecord {
                        epoch: e,
                        ..last.clone()
                    });
                }
                break;
            }
        }
    }
    trace.snapshots.push(scorer.clone());
    Ok((scorer, trace))
}

/// Gradient descent on `spec` with `f_dagger` held fixed, for `config.epochs`
/// epochs from `warm_start` (or zero weights).
pub fn minimize(
    spec: &RiskSpec,
    roles: &Roles<'_>,
    f_dagger: Option<&[f64]>,
    config: &TrainConfig,
    warm_start: Option<&LinearScorer>,
) -> Result<(LinearScorer, TrainTrace)> {
    let start = match warm_start {
        Some(s) => s.clone(),
        None => LinearScorer::zeros(training_dim(roles)?),
    };
    let dagger = f_dagger.map_or(Dagger::None, Dagger::Frozen);
    descend(spec, roles, dagger, config, start)
}

fn dagger_set<'a>(spec: &RiskSpec, roles: &Roles<'a>) -> Result<&'a LabeledSampleSet> {
    let role = spec
        .kind
        .dagger_role()
        .ok_or_else(|| PueError::Parameter(format!("{} has no proxy term", spec.kind)))?;
    roles.need(role)
}

/// One alternate round: proxy frozen to `previous` on the proxy dataset,
/// starting from `previous`.
pub fn alternate_round(
    spec: &RiskSpec,
    roles: &Roles<'_>,
    previous: &LinearScorer,
    config: &TrainConfig,
) -> Result<(LinearScorer, TrainTrace)> {
    let dagger = previous.probabilities(dagger_set(spec, roles)?);
    minimize(spec, roles, Some(&dagger), config, Some(previous))
}

/// `config.rounds` rounds of minimization, each freezing the proxy to the
/// previous round's scorer. The first round uses the constant
/// `config.init_guess` and starts from zero weights.
pub fn train_alternate(
    spec: &RiskSpec,
    roles: &Roles<'_>,
    config: &TrainConfig,
) -> Result<(LinearScorer, TrainTrace)> {
    config.validate()?;
    let dset = dagger_set(spec, roles)?;
    let init = vec![config.init_guess; dset.len()];
    let (mut scorer, first) = minimize(spec, roles, Some(&init), config, None)?;
    let mut trace = TrainTrace::default();
    trace.extend(first, 0);
    for round in 1..config.rounds {
        let (next, t) = alternate_round(spec, roles, &scorer, config)?;
        scorer = next;
        trace.extend(t, round);
    }
    Ok((scorer, trace))
}

/// A single run in which the proxy is the current scorer, refreshed every epoch
/// and treated as a constant when differentiating.
pub fn train_direct(
    spec: &RiskSpec,
    roles: &Roles<'_>,
    config: &TrainConfig,
) -> Result<(LinearScorer, TrainTrace)> {
    let dset = dagger_set(spec, roles)?;
    let start = LinearScorer::zeros(training_dim(roles)?);
    descend(spec, roles, Dagger::Live(dset), config, start)
}

fn adpue_roles<'a>(d_pu: &'a LabeledSampleSet, d_e: &'a LabeledSampleSet) -> Roles<'a> {
    Roles {
        pu: Some(d_pu),
        exposure: Some(d_e),
        ..Roles::default()
    }
}

pub fn train_adpue_alternate(
    d_pu: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
    config: &TrainConfig,
) -> Result<(LinearScorer, TrainTrace)> {
    let spec = RiskSpec::plain(RiskKind::AdpueAlternate)?;
    train_alternate(&spec, &adpue_roles(d_pu, d_e), config)
}

pub fn train_adpue_direct(
    d_pu: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
    config: &TrainConfig,
) -> Result<(LinearScorer, TrainTrace)> {
    let spec = RiskSpec::plain(RiskKind::AdpueDirect)?;
    train_direct(&spec, &adpue_roles(d_pu, d_e), config)
}

/// Trains any risk kind: plain minimization when it has no proxy term, the
/// direct loop for the `*_DIRECT` kinds, the alternate loop otherwise.
pub fn train_variant(
    spec: &RiskSpec,
    roles: &Roles<'_>,
    config: &TrainConfig,
) -> Result<(LinearScorer, TrainTrace)> {
    if spec.kind.dagger_role().is_none() {
        minimize(spec, roles, None, config, None)
    } else if spec.kind.is_direct() {
        train_direct(spec, roles, config)
    } else {
        train_alternate(spec, roles, config)
    }
}
