//! Empirical risk functionals and their gradients for linear scorers.
//!
//! Every risk is a weighted mean of log losses over one or more datasets.
//! Risks with a non-negative correction split into an always-present part and
//! a guarded part that enters through `max{·, 0}`; when the guarded part is
//! negative it contributes neither value nor gradient and `clipped` is set.
//!
//! Proxy probabilities `f†` are passed as precomputed per-row values for the
//! dataset named by [`RiskKind::dagger_role`], so a trainer can freeze them.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSampleSet;
use crate::error::{PueError, Result, Role};
use crate::loss::EPSILON;
use crate::scorer::LinearScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RiskKind {
    /// nnPUE risk trained by the alternate (frozen proxy) loop.
    AdpueAlternate,
    /// nnPUE risk trained with the proxy re-read from the current scorer each epoch.
    AdpueDirect,
    /// nnPUE risk; trains like `AdpueAlternate`.
    Nnpue,
    /// Uncorrected pseudo risk, trained directly. Used to measure what the
    /// non-negative correction buys.
    PueDirect,
    Adpe,
    Adfpue,
    Ads,
    Adss,
    Dadss,
    Ad3se,
    Logit,
    Upu,
    Nnpu,
}

impl RiskKind {
    pub const ALL: [RiskKind; 13] = [
        RiskKind::AdpueAlternate,
        RiskKind::AdpueDirect,
        RiskKind::Nnpue,
        RiskKind::PueDirect,
        RiskKind::Adpe,
        RiskKind::Adfpue,
        RiskKind::Ads,
        RiskKind::Adss,
        RiskKind::Dadss,
        RiskKind::Ad3se,
        RiskKind::Logit,
        RiskKind::Upu,
        RiskKind::Nnpu,
    ];

    pub fn needs_class_prior(self) -> bool {
        matches!(
            self,
            RiskKind::Adpe | RiskKind::Adfpue | RiskKind::Upu | RiskKind::Nnpu
        )
    }

    pub fn needs_mix_weight(self) -> bool {
        self == RiskKind::Dadss
    }

    /// The dataset whose rows the proxy `f†` is evaluated on, if the risk has one.
    pub fn dagger_role(self) -> Option<Role> {
        use RiskKind::*;
        match self {
            AdpueAlternate | AdpueDirect | Nnpue | PueDirect | Adpe | Adfpue => {
                Some(Role::Exposure)
            }
            Adss | Dadss | Ad3se => Some(Role::SemiSupervised),
            Ads | Logit | Upu | Nnpu => None,
        }
    }

    /// Whether training re-reads `f†` from the current scorer every epoch.
    pub fn is_direct(self) -> bool {
        matches!(self, RiskKind::AdpueDirect | RiskKind::PueDirect)
    }

    pub fn name(self) -> &'static str {
        use RiskKind::*;
        match self {
            AdpueAlternate => "ADPUE_ALTERNATE",
            AdpueDirect => "ADPUE_DIRECT",
            Nnpue => "NNPUE",
            PueDirect => "PUE_DIRECT",
            Adpe => "ADPE",
            Adfpue => "ADFPUE",
            Ads => "ADS",
            Adss => "ADSS",
            Dadss => "DADSS",
            Ad3se => "AD3SE",
            Logit => "LOGIT",
            Upu => "UPU",
            Nnpu => "NNPU",
        }
    }
}

impl std::fmt::Display for RiskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RiskKind {
    type Err = PueError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        RiskKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| PueError::Parameter(format!("unknown risk kind `{s}`")))
    }
}

/// Which risk to evaluate plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub kind: RiskKind,
    /// `q(w = 1)`, the marginal rate of observed positives.
    pub class_prior: Option<f64>,
    /// Weight on the semi-supervised part of DADSS.
    pub mix_weight: Option<f64>,
}

impl RiskSpec {
    pub fn new(kind: RiskKind, class_prior: Option<f64>, mix_weight: Option<f64>) -> Result<Self> {
        match (kind.needs_class_prior(), class_prior) {
            (true, None) => {
                return Err(PueError::Parameter(format!(
                    "{kind} requires a class prior"
                )))
            }
            (false, Some(_)) => {
                return Err(PueError::Parameter(format!("{kind} takes no class prior")))
            }
            (true, Some(p)) => check_prior(p)?,
            _ => {}
        }
        match (kind.needs_mix_weight(), mix_weight) {
            (true, None) => {
                return Err(PueError::Parameter(format!("{kind} requires a mix weight")))
            }
            (false, Some(_)) => {
                return Err(PueError::Parameter(format!("{kind} takes no mix weight")))
            }
            (true, Some(a)) => check_mix(a)?,
            _ => {}
        }
        Ok(RiskSpec {
            kind,
            class_prior,
            mix_weight,
        })
    }

    /// A spec for kinds that take no hyperparameters.
    pub fn plain(kind: RiskKind) -> Result<Self> {
        Self::new(kind, None, None)
    }

    pub fn evaluate(
        &self,
        f: &LinearScorer,
        roles: &Roles<'_>,
        f_dagger: Option<&[f64]>,
    ) -> Result<RiskEval> {
        self.eval(f, roles, f_dagger, true)
    }

    pub(crate) fn eval(
        &self,
        f: &LinearScorer,
        roles: &Roles<'_>,
        f_dagger: Option<&[f64]>,
        want_grad: bool,
    ) -> Result<RiskEval> {
        use RiskKind::*;
        let dagger = || {
            f_dagger.ok_or_else(|| PueError::Parameter(format!("{} needs f† values", self.kind)))
        };
        let prior = || {
            self.class_prior
                .ok_or_else(|| PueError::Parameter(format!("{} needs a class prior", self.kind)))
        };
        let g = want_grad;
        match self.kind {
            AdpueAlternate | AdpueDirect | Nnpue => nnpue(
                f,
                dagger()?,
                roles.need(Role::PositiveUnlabeled)?,
                roles.need(Role::Exposure)?,
                g,
            ),
            PueDirect => pseudo(
                f,
                dagger()?,
                roles.need(Role::PositiveUnlabeled)?,
                roles.need(Role::Exposure)?,
                g,
            ),
            Adpe => adfpue(
                f,
                dagger()?,
                roles.need(Role::Positive)?,
                None,
                roles.need(Role::Exposure)?,
                prior()?,
                g,
            ),
            Adfpue => adfpue(
                f,
                dagger()?,
                roles.need(Role::Positive)?,
                Some(roles.need(Role::Unlabeled)?),
                roles.need(Role::Exposure)?,
                prior()?,
                g,
            ),
            Ads => ads(f, roles.need(Role::SemiSupervised)?, g),
            Adss => adss(f, dagger()?, roles.need(Role::SemiSupervised)?, g),
            Dadss => {
                let a = self
                    .mix_weight
                    .ok_or_else(|| PueError::Parameter("DADSS needs a mix weight".into()))?;
                dadss(f, dagger()?, roles.need(Role::SemiSupervised)?, a, g)
            }
            Ad3se => ad3se(f, dagger()?, roles.need(Role::SemiSupervised)?, roles.pu, g),
            Logit => logit(f, roles.need(Role::PositiveUnlabeled)?, g),
            Upu => upu(f, roles.need(Role::PositiveUnlabeled)?, prior()?, false, g),
            Nnpu => upu(f, roles.need(Role::PositiveUnlabeled)?, prior()?, true, g),
        }
    }
}

fn check_prior(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(PueError::Parameter(format!(
            "class prior {p} is outside (0, 1)"
        )));
    }
    Ok(())
}

fn check_mix(a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(PueError::Parameter(format!(
            "mix weight {a} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// Borrowed datasets by role; absent roles are `None`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Roles<'a> {
    pub pu: Option<&'a LabeledSampleSet>,
    pub exposure: Option<&'a LabeledSampleSet>,
    pub positive: Option<&'a LabeledSampleSet>,
    pub unlabeled: Option<&'a LabeledSampleSet>,
    pub sse: Option<&'a LabeledSampleSet>,
}

impl<'a> Roles<'a> {
    pub fn get(&self, role: Role) -> Option<&'a LabeledSampleSet> {
        match role {
            Role::PositiveUnlabeled => self.pu,
            Role::Exposure => self.exposure,
            Role::Positive => self.positive,
            Role::Unlabeled => self.unlabeled,
            Role::SemiSupervised => self.sse,
            Role::Test => None,
        }
    }

    pub fn need(&self, role: Role) -> Result<&'a LabeledSampleSet> {
        self.get(role).ok_or(PueError::MissingDataset(role))
    }

    /// Every supplied dataset, in a fixed role order.
    pub fn present(&self) -> impl Iterator<Item = (Role, &'a LabeledSampleSet)> + '_ {
        [
            (Role::PositiveUnlabeled, self.pu),
            (Role::Exposure, self.exposure),
            (Role::Positive, self.positive),
            (Role::Unlabeled, self.unlabeled),
            (Role::SemiSupervised, self.sse),
        ]
        .into_iter()
        .filter_map(|(r, s)| s.map(|s| (r, s)))
    }
}

/// Risk value with its gradient in `[weights..., intercept]` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEval {
    pub value: f64,
    /// Empty when the gradient was not requested.
    pub gradient: Vec<f64>,
    /// Whether a `max{·, 0}` guard cut its argument.
    pub clipped: bool,
    /// The guarded argument before clipping, if the risk has one.
    pub guard: Option<f64>,
}

/// Per-row probability and losses under one scorer.
#[derive(Clone, Copy)]
struct RowScore {
    prob: f64,
    loss_pos: f64,
    loss_neg: f64,
    /// False where the probability clamp is active and the derivative vanishes.
    live: bool,
}

impl RowScore {
    fn at(z: f64) -> Self {
        let e = (-z.abs()).exp();
        let s = if z >= 0.0 {
            1.0 / (1.0 + e)
        } else {
            e / (1.0 + e)
        };
        if s > EPSILON && s < 1.0 - EPSILON {
            let soft = e.ln_1p();
            RowScore {
                prob: s,
                loss_pos: soft + (-z).max(0.0),
                loss_neg: soft + z.max(0.0),
                live: true,
            }
        } else {
            let p = s.clamp(EPSILON, 1.0 - EPSILON);
            RowScore {
                prob: p,
                loss_pos: -p.ln(),
                loss_neg: -(1.0 - p).ln(),
                live: false,
            }
        }
    }
}

/// Row scores for one dataset under one scorer.
struct Scored<'a> {
    set: &'a LabeledSampleSet,
    rows: Vec<RowScore>,
}

impl<'a> Scored<'a> {
    fn new(f: &LinearScorer, set: &'a LabeledSampleSet) -> Self {
        Scored {
            set,
            rows: set.rows().map(|x| RowScore::at(f.linear(x))).collect(),
        }
    }
}

/// One dataset's contribution: `scale · Σ_i [c1_i ℓ(f, 1) + c0_i ℓ(f, 0)]`.
struct Part<'s, 'a> {
    scored: &'s Scored<'a>,
    scale: f64,
    coef: &'s dyn Fn(usize) -> (f64, f64),
}

struct Term {
    value: f64,
    grad: Vec<f64>,
}

fn accumulate(parts: &[Part<'_, '_>], dim: usize, want_grad: bool) -> Term {
    let mut value = 0.0;
    let mut grad = if want_grad {
        vec![0.0; dim + 1]
    } else {
        Vec::new()
    };
    for part in parts {
        let s = part.scored;
        for (i, r) in s.rows.iter().enumerate() {
            let (c1, c0) = (part.coef)(i);
            if c1 == 0.0 && c0 == 0.0 {
                continue;
            }
            value += part.scale * (c1 * r.loss_pos + c0 * r.loss_neg);
            if want_grad && r.live {
                let p = r.prob;
                // d/dz of −ln σ(z) is σ − 1; of −ln(1 − σ(z)) is σ.
                let dz = part.scale * (c1 * (p - 1.0) + c0 * p);
                for (g, x) in grad[..dim].iter_mut().zip(s.set.row(i)) {
                    *g += dz * x;
                }
                grad[dim] += dz;
            }
        }
    }
    Term { value, grad }
}

/// `always + max{guarded, 0}`, with the guarded gradient kept when the argument is ≥ 0.
fn combine(always: Term, guarded: Option<Term>) -> RiskEval {
    let mut value = always.value;
    let mut gradient = always.grad;
    let mut clipped = false;
    let mut guard = None;
    if let Some(t) = guarded {
        guard = Some(t.value);
        if t.value >= 0.0 {
            value += t.value;
            for (g, h) in gradient.iter_mut().zip(&t.grad) {
                *g += h;
            }
        } else {
            clipped = true;
        }
    }
    RiskEval {
        value,
        gradient,
        clipped,
        guard,
    }
}

fn check_dims(f: &LinearScorer, sets: &[&LabeledSampleSet]) -> Result<usize> {
    let d = f.dim();
    if let Some(s) = sets.iter().find(|s| s.dim() != d) {
        return Err(PueError::Parameter(format!(
            "dataset dimension {} does not match scorer dimension {d}",
            s.dim()
        )));
    }
    Ok(d)
}

fn non_empty(set: &LabeledSampleSet, role: Role) -> Result<()> {
    if set.is_empty() {
        return Err(PueError::EmptySet(format!("dataset {role} has no rows")));
    }
    Ok(())
}

fn check_dagger(f_dagger: &[f64], set: &LabeledSampleSet, role: Role) -> Result<()> {
    if f_dagger.len() != set.len() {
        return Err(PueError::Parameter(format!(
            "{} f† values for {} rows of {role}",
            f_dagger.len(),
            set.len()
        )));
    }
    let tol = 1e-12;
    if let Some(v) = f_dagger
        .iter()
        .find(|&&v| !(v >= EPSILON - tol && v <= 1.0 - EPSILON + tol))
    {
        return Err(PueError::Parameter(format!(
            "f† value {v} outside [ε, 1 − ε]"
        )));
    }
    Ok(())
}

fn b2f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn inv_len(set: &LabeledSampleSet) -> f64 {
    1.0 / set.len() as f64
}

/// Uncorrected pseudo risk:
/// `Ê_PU[W ℓ(f,1) + (1−W) ℓ(f,0)] + Ê_E[f†(1−E) ℓ(f,1)] − Ê_E[f†(1−E) ℓ(f,0)]`.
pub fn risk_pseudo(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_pu: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
) -> Result<RiskEval> {
    pseudo(f, f_dagger, d_pu, d_e, true)
}

fn pseudo(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_pu: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
    want_grad: bool,
) -> Result<RiskEval> {
    let w = d_pu.require_w(Role::PositiveUnlabeled)?;
    let e = d_e.require_e(Role::Exposure)?;
    non_empty(d_pu, Role::PositiveUnlabeled)?;
    non_empty(d_e, Role::Exposure)?;
    check_dagger(f_dagger, d_e, Role::Exposure)?;
    let dim = check_dims(f, &[d_pu, d_e])?;
    let (spu, se) = (Scored::new(f, d_pu), Scored::new(f, d_e));
    let pu_coef = |i: usize| (b2f(w[i]), 1.0 - b2f(w[i]));
    let e_coef = |i: usize| {
        let a = f_dagger[i] * (1.0 - b2f(e[i]));
        (a, -a)
    };
    let always = accumulate(
        &[
            Part {
                scored: &spu,
                scale: inv_len(d_pu),
                coef: &pu_coef,
            },
            Part {
                scored: &se,
                scale: inv_len(d_e),
                coef: &e_coef,
            },
        ],
        dim,
        want_grad,
    );
    Ok(combine(always, None))
}

/// Pseudo risk with the negative-class part guarded by `max{·, 0}`.
pub fn risk_nnpue(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_pu: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
) -> Result<RiskEval> {
    nnpue(f, f_dagger, d_pu, d_e, true)
}

fn nnpue(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_pu: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
    want_grad: bool,
) -> Result<RiskEval> {
    let w = d_pu.require_w(Role::PositiveUnlabeled)?;
    let e = d_e.require_e(Role::Exposure)?;
    non_empty(d_pu, Role::PositiveUnlabeled)?;
    non_empty(d_e, Role::Exposure)?;
    check_dagger(f_dagger, d_e, Role::Exposure)?;
    let dim = check_dims(f, &[d_pu, d_e])?;
    let (spu, se) = (Scored::new(f, d_pu), Scored::new(f, d_e));
    let hidden = |i: usize| f_dagger[i] * (1.0 - b2f(e[i]));
    let pu_pos = |i: usize| (b2f(w[i]), 0.0);
    let e_pos = |i: usize| (hidden(i), 0.0);
    let pu_neg = |i: usize| (0.0, 1.0 - b2f(w[i]));
    let e_neg = |i: usize| (0.0, -hidden(i));
    let always = accumulate(
        &[
            Part {
                scored: &spu,
                scale: inv_len(d_pu),
                coef: &pu_pos,
            },
            Part {
                scored: &se,
                scale: inv_len(d_e),
                coef: &e_pos,
            },
        ],
        dim,
        want_grad,
    );
    let guarded = accumulate(
        &[
            Part {
                scored: &spu,
                scale: inv_len(d_pu),
                coef: &pu_neg,
            },
            Part {
                scored: &se,
                scale: inv_len(d_e),
                coef: &e_neg,
            },
        ],
        dim,
        want_grad,
    );
    Ok(combine(always, Some(guarded)))
}

/// Positive-and-exposure risk:
/// `π Ê_P[ℓ(f,1)] + max{Ê_E[ℓ(f,0)] − π Ê_P[ℓ(f,0)], 0} + Ê_E[f†(1−E)(ℓ(f,1) − ℓ(f,0))]`.
pub fn risk_adpe(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_p: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
    class_prior: f64,
) -> Result<RiskEval> {
    adfpue(f, f_dagger, d_p, None, d_e, class_prior, true)
}

/// As [`risk_adpe`], but the unlabeled negative-class mean runs over the rows
/// of `d_u` and `d_e` together, each row weighted `1 / (|D^U| + |D^E|)`.
pub fn risk_adfpue(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_p: &LabeledSampleSet,
    d_u: &LabeledSampleSet,
    d_e: &LabeledSampleSet,
    class_prior: f64,
) -> Result<RiskEval> {
    adfpue(f, f_dagger, d_p, Some(d_u), d_e, class_prior, true)
}

fn adfpue(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_p: &LabeledSampleSet,
    d_u: Option<&LabeledSampleSet>,
    d_e: &LabeledSampleSet,
    class_prior: f64,
    want_grad: bool,
) -> Result<RiskEval> {
    check_prior(class_prior)?;
    let e = d_e.require_e(Role::Exposure)?;
    non_empty(d_p, Role::Positive)?;
    non_empty(d_e, Role::Exposure)?;
    check_dagger(f_dagger, d_e, Role::Exposure)?;
    let mut sets = vec![d_p, d_e];
    sets.extend(d_u);
    let dim = check_dims(f, &sets)?;
    let (sp, se) = (Scored::new(f, d_p), Scored::new(f, d_e));
    let su = d_u.map(|u| Scored::new(f, u));
    let pi = class_prior;
    let p_pos = |_: usize| (pi, 0.0);
    let p_neg = |_: usize| (0.0, -pi);
    let unl_neg = |_: usize| (0.0, 1.0);
    let e_debias = |i: usize| {
        let a = f_dagger[i] * (1.0 - b2f(e[i]));
        (a, -a)
    };
    let always = accumulate(
        &[
            Part {
                scored: &sp,
                scale: inv_len(d_p),
                coef: &p_pos,
            },
            Part {
                scored: &se,
                scale: inv_len(d_e),
                coef: &e_debias,
            },
        ],
        dim,
        want_grad,
    );
    let unl_scale = 1.0 / (d_e.len() + d_u.map_or(0, |u| u.len())) as f64;
    let mut guarded_parts = vec![
        Part {
            scored: &se,
            scale: unl_scale,
            coef: &unl_neg,
        },
        Part {
            scored: &sp,
            scale: inv_len(d_p),
            coef: &p_neg,
        },
    ];
    if let Some(su) = &su {
        guarded_parts.push(Part {
            scored: su,
            scale: unl_scale,
            coef: &unl_neg,
        });
    }
    let guarded = accumulate(&guarded_parts, dim, want_grad);
    Ok(combine(always, Some(guarded)))
}

/// Supervised log loss over the exposed rows (`E = 1`) of `d_sse`.
pub fn risk_ads(f: &LinearScorer, d_sse: &LabeledSampleSet) -> Result<RiskEval> {
    ads(f, d_sse, true)
}

fn ads(f: &LinearScorer, d_sse: &LabeledSampleSet, want_grad: bool) -> Result<RiskEval> {
    let w = d_sse.require_w(Role::SemiSupervised)?;
    let e = d_sse.require_e(Role::SemiSupervised)?;
    let exposed = e.iter().filter(|&&x| x).count();
    if exposed == 0 {
        return Err(PueError::DegenerateSubset(
            "no exposed rows in D^SSE".into(),
        ));
    }
    let dim = check_dims(f, &[d_sse])?;
    let s = Scored::new(f, d_sse);
    let coef = |i: usize| {
        if e[i] {
            (b2f(w[i]), 1.0 - b2f(w[i]))
        } else {
            (0.0, 0.0)
        }
    };
    let t = accumulate(
        &[Part {
            scored: &s,
            scale: 1.0 / exposed as f64,
            coef: &coef,
        }],
        dim,
        want_grad,
    );
    Ok(combine(t, None))
}

/// Semi-supervised debiased risk over `d_sse`, without a non-negative guard.
pub fn risk_adss(f: &LinearScorer, f_dagger: &[f64], d_sse: &LabeledSampleSet) -> Result<RiskEval> {
    adss(f, f_dagger, d_sse, true)
}

fn adss(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_sse: &LabeledSampleSet,
    want_grad: bool,
) -> Result<RiskEval> {
    let w = d_sse.require_w(Role::SemiSupervised)?;
    let e = d_sse.require_e(Role::SemiSupervised)?;
    non_empty(d_sse, Role::SemiSupervised)?;
    check_dagger(f_dagger, d_sse, Role::SemiSupervised)?;
    let dim = check_dims(f, &[d_sse])?;
    let s = Scored::new(f, d_sse);
    let coef = |i: usize| {
        let a = f_dagger[i] * (1.0 - b2f(e[i]));
        (b2f(w[i]) + a, 1.0 - b2f(w[i]) - a)
    };
    let t = accumulate(
        &[Part {
            scored: &s,
            scale: inv_len(d_sse),
            coef: &coef,
        }],
        dim,
        want_grad,
    );
    Ok(combine(t, None))
}

/// `α · ADSS + (1 − α) · ADS`.
pub fn risk_dadss(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_sse: &LabeledSampleSet,
    mix_weight: f64,
) -> Result<RiskEval> {
    dadss(f, f_dagger, d_sse, mix_weight, true)
}

fn dadss(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_sse: &LabeledSampleSet,
    mix_weight: f64,
    want_grad: bool,
) -> Result<RiskEval> {
    check_mix(mix_weight)?;
    let semi = adss(f, f_dagger, d_sse, want_grad)?;
    let sup = ads(f, d_sse, want_grad)?;
    let a = mix_weight;
    Ok(RiskEval {
        value: a * semi.value + (1.0 - a) * sup.value,
        gradient: semi
            .gradient
            .iter()
            .zip(&sup.gradient)
            .map(|(s, l)| a * s + (1.0 - a) * l)
            .collect(),
        clipped: false,
        guard: None,
    })
}

/// nnPUE over `d_sse` joined with extra PU rows. The `W` means run over both
/// sets together; the proxy terms use `d_sse` alone.
pub fn risk_ad3se(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_sse: &LabeledSampleSet,
    d_pu: &LabeledSampleSet,
) -> Result<RiskEval> {
    ad3se(f, f_dagger, d_sse, Some(d_pu), true)
}

fn ad3se(
    f: &LinearScorer,
    f_dagger: &[f64],
    d_sse: &LabeledSampleSet,
    d_pu: Option<&LabeledSampleSet>,
    want_grad: bool,
) -> Result<RiskEval> {
    let w_sse = d_sse.require_w(Role::SemiSupervised)?;
    let e = d_sse.require_e(Role::SemiSupervised)?;
    let w_pu = d_pu
        .map(|s| s.require_w(Role::PositiveUnlabeled))
        .transpose()?;
    non_empty(d_sse, Role::SemiSupervised)?;
    check_dagger(f_dagger, d_sse, Role::SemiSupervised)?;
    let mut sets = vec![d_sse];
    sets.extend(d_pu);
    let dim = check_dims(f, &sets)?;
    let s_sse = Scored::new(f, d_sse);
    let s_pu = d_pu.map(|s| Scored::new(f, s));
    let joint = 1.0 / (d_sse.len() + d_pu.map_or(0, |s| s.len())) as f64;
    let hidden = |i: usize| f_dagger[i] * (1.0 - b2f(e[i]));
    let sse_pos = |i: usize| (b2f(w_sse[i]), 0.0);
    let sse_neg = |i: usize| (0.0, 1.0 - b2f(w_sse[i]));
    let pu_pos = |i: usize| (b2f(w_pu.unwrap_or_default()[i]), 0.0);
    let pu_neg = |i: usize| (0.0, 1.0 - b2f(w_pu.unwrap_or_default()[i]));
    let hid_pos = |i: usize| (hidden(i), 0.0);
    let hid_neg = |i: usize| (0.0, -hidden(i));

    let mut always = vec![
        Part {
            scored: &s_sse,
            scale: joint,
            coef: &sse_pos,
        },
        Part {
            scored: &s_sse,
            scale: inv_len(d_sse),
            coef: &hid_pos,
        },
    ];
    let mut guarded = vec![
        Part {
            scored: &s_sse,
            scale: joint,
            coef: &sse_neg,
        },
        Part {
            scored: &s_sse,
            scale: inv_len(d_sse),
            coef: &hid_neg,
        },
    ];
    if let Some(s) = &s_pu {
        always.push(Part {
            scored: s,
            scale: joint,
            coef: &pu_pos,
        });
        guarded.push(Part {
            scored: s,
            scale: joint,
            coef: &pu_neg,
        });
    }
    Ok(combine(
        accumulate(&always, dim, want_grad),
        Some(accumulate(&guarded, dim, want_grad)),
    ))
}

/// Comparison baselines on `d_pu`: plain logistic regression on `W`
/// (`LOGIT`), or unbiased / non-negative PU risks with positives `W = 1`,
/// unlabeled = every row, and prior `π`.
pub fn risk_baseline(
    kind: RiskKind,
    f: &LinearScorer,
    d_pu: &LabeledSampleSet,
    class_prior: Option<f64>,
) -> Result<RiskEval> {
    match kind {
        RiskKind::Logit => logit(f, d_pu, true),
        RiskKind::Upu | RiskKind::Nnpu => {
            let pi = class_prior
                .ok_or_else(|| PueError::Parameter(format!("{kind} requires a class prior")))?;
            upu(f, d_pu, pi, kind == RiskKind::Nnpu, true)
        }
        other => Err(PueError::Parameter(format!(
            "{other} is not a baseline risk"
        ))),
    }
}

fn logit(f: &LinearScorer, d_pu: &LabeledSampleSet, want_grad: bool) -> Result<RiskEval> {
    let w = d_pu.require_w(Role::PositiveUnlabeled)?;
    non_empty(d_pu, Role::PositiveUnlabeled)?;
    let dim = check_dims(f, &[d_pu])?;
    let s = Scored::new(f, d_pu);
    let coef = |i: usize| (b2f(w[i]), 1.0 - b2f(w[i]));
    let t = accumulate(
        &[Part {
            scored: &s,
            scale: inv_len(d_pu),
            coef: &coef,
        }],
        dim,
        want_grad,
    );
    Ok(combine(t, None))
}

/// `π Ê_P[ℓ(f,1)] + (Ê_U[ℓ(f,0)] − π Ê_P[ℓ(f,0)])`, the bracket optionally
/// guarded. `π = 0` is accepted here and reduces to `Ê_U[ℓ(f,0)]`.
fn upu(
    f: &LinearScorer,
    d_pu: &LabeledSampleSet,
    pi: f64,
    guard: bool,
    want_grad: bool,
) -> Result<RiskEval> {
    if !(0.0..1.0).contains(&pi) {
        return Err(PueError::Parameter(format!(
            "class prior {pi} is outside [0, 1)"
        )));
    }
    let w = d_pu.require_w(Role::PositiveUnlabeled)?;
    non_empty(d_pu, Role::PositiveUnlabeled)?;
    let n_pos = w.iter().filter(|&&x| x).count();
    if n_pos == 0 && pi > 0.0 {
        return Err(PueError::DegenerateSubset(
            "no observed positives in D^PU".into(),
        ));
    }
    let dim = check_dims(f, &[d_pu])?;
    let s = Scored::new(f, d_pu);
    let pos_scale = if n_pos == 0 { 0.0 } else { pi / n_pos as f64 };
    let pos = |i: usize| (b2f(w[i]), 0.0);
    let neg = |i: usize| (0.0, -b2f(w[i]));
    let unl = |_: usize| (0.0, 1.0);
    let always = accumulate(
        &[Part {
            scored: &s,
            scale: pos_scale,
            coef: &pos,
        }],
        dim,
        want_grad,
    );
    let bracket = accumulate(
        &[
            Part {
                scored: &s,
                scale: inv_len(d_pu),
                coef: &unl,
            },
            Part {
                scored: &s,
                scale: pos_scale,
                coef: &neg,
            },
        ],
        dim,
        want_grad,
    );
    if guard {
        Ok(combine(always, Some(bracket)))
    } else {
        let mut r = combine(always, None);
        r.value += bracket.value;
        for (g, h) in r.gradient.iter_mut().zip(&bracket.grad) {
            *g += h;
        }
        Ok(r)
    }
}
