//! Experiment orchestration: configs, repeated trials, metrics and reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    calibrate_c, parse_sparse_dataset, split_for_problem, subsample, synthesize_observations,
    ExposureSpec, Problem, SplitData, SplitSpec,
};
use crate::dataset::LabeledSampleSet;
use crate::error::{PueError, Result};
use crate::oracle::{sample_from, DiscretePopulation};
use crate::risks::{RiskKind, RiskSpec};
use crate::scorer::LinearScorer;
use crate::train::{train_variant, TrainConfig};

/// Name of the constant majority-class row included in every report.
pub const MAJORITY: &str = "MAJORITY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    /// Sparse-format file, resolved against the config file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Training-pool rows drawn per trial in addition to the test rows.
    /// Absent means every row is used.
    #[serde(default)]
    pub pool_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub problem: Problem,
    pub methods: Vec<RiskKind>,
    /// Overrides the per-trial observed-positive rate for kinds that need a prior.
    #[serde(default)]
    pub class_prior: Option<f64>,
    #[serde(default)]
    pub mix_weight: Option<f64>,
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    #[serde(default)]
    pub population: Option<DiscretePopulation>,
    /// Rows drawn from `population` per trial.
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub exposure: ExposureSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
    #[serde(default)]
    pub trace_output: Option<PathBuf>,
}

fn default_trials() -> usize {
    100
}

fn default_format() -> ReportFormat {
    ReportFormat::Csv
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| PueError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative dataset path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PueError::File {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(ds) = cfg.dataset.as_mut() {
            if ds.path.is_relative() {
                if let Some(dir) = path.parent() {
                    ds.path = dir.join(&ds.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(PueError::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(PueError::Config("method list is empty".into()));
        }
        match (&self.dataset, &self.population) {
            (Some(_), Some(_)) => {
                return Err(PueError::Config(
                    "give either [dataset] or [population], not both".into(),
                ))
            }
            (None, None) => {
                return Err(PueError::Config(
                    "no [dataset] or [population] section".into(),
                ))
            }
            (None, Some(_)) if self.sample_size.unwrap_or(0) == 0 => {
                return Err(PueError::Config(
                    "a population source needs a positive sample_size".into(),
                ))
            }
            _ => {}
        }
        if self.methods.iter().any(|k| k.needs_mix_weight()) && self.mix_weight.is_none() {
            return Err(PueError::Config("DADSS needs mix_weight".into()));
        }
        self.train
            .validate()
            .map_err(|e| PueError::Config(e.to_string()))?;
        if let Some(p) = self.class_prior {
            if !(p > 0.0 && p < 1.0) {
                return Err(PueError::Config(format!("class prior {p} outside (0, 1)")));
            }
        }
        Ok(())
    }

    fn spec_for(&self, kind: RiskKind, split: &SplitData) -> Result<RiskSpec> {
        let prior = kind
            .needs_class_prior()
            .then(|| self.class_prior.unwrap_or(split.class_prior));
        let mix = kind.needs_mix_weight().then_some(self.mix_weight).flatten();
        RiskSpec::new(kind, prior, mix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Inductive,
    Transductive,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Inductive => "inductive",
            Mode::Transductive => "transductive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// No positives were predicted, so precision was set to 1.
    pub precision_defaulted: bool,
    /// No true positives existed, so recall was set to 1.
    pub recall_defaulted: bool,
}

fn metrics_from(pred: impl Iterator<Item = bool>, y: &[bool]) -> Result<Metrics> {
    if y.is_empty() {
        return Err(PueError::Evaluation("no rows to evaluate".into()));
    }
    let (mut tp, mut fp, mut fn_, mut hits) = (0usize, 0usize, 0usize, 0usize);
    for (p, &t) in pred.zip(y) {
        hits += (p == t) as usize;
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let ratio = |a: usize, b: usize| {
        if b == 0 {
            (1.0, true)
        } else {
            (a as f64 / b as f64, false)
        }
    };
    let (precision, precision_defaulted) = ratio(tp, tp + fp);
    let (recall, recall_defaulted) = ratio(tp, tp + fn_);
    Ok(Metrics {
        accuracy: hits as f64 / y.len() as f64,
        precision,
        recall,
        precision_defaulted,
        recall_defaulted,
    })
}

fn eval_rows(data: &LabeledSampleSet, mode: Mode) -> Vec<usize> {
    let n = data.len();
    match mode {
        Mode::Inductive => (0..n).collect(),
        Mode::Transductive => match (data.w(), data.e()) {
            (Some(w), _) => (0..n).filter(|&i| !w[i]).collect(),
            (None, Some(e)) => (0..n).filter(|&i| !e[i]).collect(),
            (None, None) => (0..n).collect(),
        },
    }
}

/// Accuracy, precision and recall of `model` against `y_oracle`.
///
/// In transductive mode rows with `W = 1` (or `E = 1` when only `e` is
/// present) are excluded; sets without either column are used whole.
pub fn evaluate(model: &LinearScorer, data: &LabeledSampleSet, mode: Mode) -> Result<Metrics> {
    let y = data
        .y_oracle()
        .ok_or_else(|| PueError::Evaluation("dataset has no y_oracle column".into()))?;
    if model.dim() != data.dim() {
        return Err(PueError::Evaluation(format!(
            "model dimension {} does not match data dimension {}",
            model.dim(),
            data.dim()
        )));
    }
    let rows = eval_rows(data, mode);
    let ys: Vec<bool> = rows.iter().map(|&i| y[i]).collect();
    metrics_from(rows.iter().map(|&i| model.predict(data.row(i))), &ys)
}

/// The constant classifier predicting the more common label of `data`.
pub fn evaluate_majority(data: &LabeledSampleSet, mode: Mode) -> Result<Metrics> {
    let y = data
        .y_oracle()
        .ok_or_else(|| PueError::Evaluation("dataset has no y_oracle column".into()))?;
    let rows = eval_rows(data, mode);
    let ys: Vec<bool> = rows.iter().map(|&i| y[i]).collect();
    let pos = ys.iter().filter(|&&v| v).count();
    let guess = 2 * pos >= ys.len();
    metrics_from(std::iter::repeat(guess), &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub trial: usize,
    pub mode: Mode,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub precision_defaulted: bool,
    pub recall_defaulted: bool,
    /// Training epochs in which a non-negative guard was active.
    pub clipped_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub mode: Mode,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub method: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub problem: Problem,
    pub seed: u64,
    pub trials: usize,
    /// Exposure constant calibrated on the full dataset, for file sources.
    pub exposure_c: Option<f64>,
    pub feature_scaling: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub info: Option<RunInfo>,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<TrialFailure>,
}

impl EvalReport {
    pub fn from_rows(
        info: Option<RunInfo>,
        rows: Vec<ReportRow>,
        failures: Vec<TrialFailure>,
    ) -> Self {
        let aggregates = aggregate(&rows);
        EvalReport {
            info,
            rows,
            aggregates,
            failures,
        }
    }

    pub fn empty() -> Self {
        Self::from_rows(None, Vec::new(), Vec::new())
    }

    /// Mean of `metric` for `method` in `mode`, if present.
    pub fn mean(&self, method: &str, mode: Mode, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.mode == mode && a.metric == metric)
            .map(|a| a.mean)
    }
}

const METRICS: [&str; 3] = ["accuracy", "precision", "recall"];

fn aggregate(rows: &[ReportRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, Mode)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(m, md)| *m == r.method && *md == r.mode) {
            keys.push((r.method.clone(), r.mode));
        }
    }
    let mut out = Vec::new();
    for (method, mode) in keys {
        let cell: Vec<&ReportRow> = rows
            .iter()
            .filter(|r| r.method == method && r.mode == mode)
            .collect();
        for metric in METRICS {
            let vals: Vec<f64> = cell
                .iter()
                .map(|r| match metric {
                    "accuracy" => r.accuracy,
                    "precision" => r.precision,
                    _ => r.recall,
                })
                .collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            out.push(Aggregate {
                method: method.clone(),
                mode,
                metric: metric.to_string(),
                mean,
                std,
                n,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub method: String,
    pub trial: usize,
    pub epoch: usize,
    pub risk: f64,
    pub clipped: bool,
    pub accuracy: Option<f64>,
}

struct Source {
    full: Option<LabeledSampleSet>,
    exposure_c: Option<f64>,
}

fn load_source(cfg: &ExperimentConfig) -> Result<Source> {
    match &cfg.dataset {
        Some(ds) => {
            let full = parse_sparse_dataset(&ds.path, ds.dim)?;
            let c = calibrate_c(&full, &cfg.exposure)?;
            log::info!(
                "calibrated exposure constant C = {c} on {} rows",
                full.len()
            );
            Ok(Source {
                full: Some(full),
                exposure_c: Some(c),
            })
        }
        None => Ok(Source {
            full: None,
            exposure_c: None,
        }),
    }
}

struct TrialOutput {
    rows: Vec<ReportRow>,
    traces: Vec<TraceRow>,
}

fn trial_data(cfg: &ExperimentConfig, src: &Source, seed: u64) -> Result<SplitData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pool_seed, obs_seed, split_seed) = (rng.next_u64(), rng.next_u64(), rng.next_u64());
    let observed = match (&src.full, &cfg.population) {
        (Some(full), _) => {
            let size = cfg
                .dataset
                .as_ref()
                .and_then(|d| d.pool_size)
                .map_or(full.len(), |p| p + cfg.split.test_count);
            if size > full.len() {
                return Err(PueError::Size(format!(
                    "pool of {size} rows requested from {} available",
                    full.len()
                )));
            }
            let pool = subsample(full, size, pool_seed);
            synthesize_observations(
                &pool,
                &cfg.exposure,
                src.exposure_c.unwrap_or(1.0),
                obs_seed,
            )?
        }
        (None, Some(pop)) => sample_from(pop, cfg.sample_size.unwrap_or(0), obs_seed)?,
        (None, None) => return Err(PueError::Config("no data source".into())),
    };
    split_for_problem(&observed, cfg.problem, &cfg.split, split_seed)
}

fn run_trial(
    cfg: &ExperimentConfig,
    src: &Source,
    trial: usize,
) -> std::result::Result<TrialOutput, TrialFailure> {
    let fail = |method: Option<&str>, e: PueError| TrialFailure {
        trial,
        method: method.map(str::to_string),
        error: e.to_string(),
    };
    let seed = cfg.seed.wrapping_add(trial as u64);
    let split = trial_data(cfg, src, seed).map_err(|e| fail(None, e))?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for mode in [Mode::Inductive, Mode::Transductive] {
        let data = if mode == Mode::Inductive {
            &split.test
        } else {
            &split.transductive
        };
        let m = evaluate_majority(data, mode).map_err(|e| fail(Some(MAJORITY), e))?;
        rows.push(row(MAJORITY, trial, mode, m, 0));
    }
    for &kind in &cfg.methods {
        let name = kind.name();
        let run = || -> Result<_> {
            let spec = cfg.spec_for(kind, &split)?;
            let (model, trace) = train_variant(&spec, &split.roles(), &cfg.train)?;
            let ind = evaluate(&model, &split.test, Mode::Inductive)?;
            let tra = evaluate(&model, &split.transductive, Mode::Transductive)?;
            Ok((ind, tra, trace))
        };
        let (ind, tra, trace) = run().map_err(|e| fail(Some(name), e))?;
        let clipped = trace.clipped_epochs();
        rows.push(row(name, trial, Mode::Inductive, ind, clipped));
        rows.push(row(name, trial, Mode::Transductive, tra, clipped));
        traces.extend(trace.epochs.iter().enumerate().map(|(i, r)| TraceRow {
            method: name.to_string(),
            trial,
            epoch: i,
            risk: r.risk,
            clipped: r.clipped,
            accuracy: r.accuracy,
        }));
    }
    Ok(TrialOutput { rows, traces })
}

fn row(method: &str, trial: usize, mode: Mode, m: Metrics, clipped_epochs: usize) -> ReportRow {
    ReportRow {
        method: method.to_string(),
        trial,
        mode,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        precision_defaulted: m.precision_defaulted,
        recall_defaulted: m.recall_defaulted,
        clipped_epochs,
    }
}

/// Runs every trial and returns the report plus per-epoch training traces.
pub fn run_experiment_with_traces(cfg: &ExperimentConfig) -> Result<(EvalReport, Vec<TraceRow>)> {
    cfg.validate()?;
    let src = load_source(cfg)?;
    let outcomes: Vec<_> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &src, t))
        .collect();
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for out in outcomes {
        match out {
            Ok(o) => {
                rows.extend(o.rows);
                traces.extend(o.traces);
            }
            Err(f) => {
                log::warn!("trial {} failed: {}", f.trial, f.error);
                failures.push(f);
            }
        }
    }
    if failures.len() * 10 > cfg.trials {
        return Err(PueError::TooManyFailures {
            failed: failures.len(),
            total: cfg.trials,
        });
    }
    let info = RunInfo {
        problem: cfg.problem,
        seed: cfg.seed,
        trials: cfg.trials,
        exposure_c: src.exposure_c,
        feature_scaling: if src.full.is_some() {
            "min-max"
        } else {
            "none"
        }
        .to_string(),
    };
    Ok((EvalReport::from_rows(Some(info), rows, failures), traces))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    run_experiment_with_traces(cfg).map(|(r, _)| r)
}

/// Renders the CSV form: one line per row, then a blank line and the
/// `method,mode,metric,mean,std,n` aggregate block when there are rows.
pub fn report_csv(report: &EvalReport) -> String {
    let mut s = String::from("method,trial,mode,accuracy,precision,recall\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.method, r.trial, r.mode, r.accuracy, r.precision, r.recall
        );
    }
    if !report.aggregates.is_empty() {
        s.push_str("\nmethod,mode,metric,mean,std,n\n");
        for a in &report.aggregates {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                a.method, a.mode, a.metric, a.mean, a.std, a.n
            );
        }
    }
    s
}

pub fn report_json(report: &EvalReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn emit_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Json => report_json(report)?,
    };
    write_file(path, &body)
}

pub fn trace_csv(traces: &[TraceRow]) -> String {
    let mut s = String::from("method,trial,epoch,risk,clipped,accuracy\n");
    for t in traces {
        let acc = t.accuracy.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            t.method, t.trial, t.epoch, t.risk, t.clipped as u8, acc
        );
    }
    s
}

pub fn emit_traces(traces: &[TraceRow], path: &Path) -> Result<()> {
    write_file(path, &trace_csv(traces))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| PueError::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, body).map_err(|source| PueError::File {
        path: path.to_path_buf(),
        source,
    })
}
