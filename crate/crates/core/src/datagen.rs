//! Semi-synthetic benchmark construction: sparse-format parsing, the exposure
//! mechanism and its calibration, observation synthesis, and role splits.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSampleSet;
use crate::error::{PueError, Result, Role};
use crate::loss::sigmoid;
use crate::risks::Roles;

/// Parses `label index:value ...` lines into an unscaled dense set.
///
/// Labels `1`/`+1` map to positive; `-1`, `0` and `2` map to negative.
/// Indices are 1-based. Blank lines and lines starting with `#` are skipped.
/// When `dim` is `None` it is taken from the largest index seen.
pub fn parse_sparse_str(text: &str, dim: Option<usize>) -> Result<LabeledSampleSet> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().unwrap_or_default();
        labels.push(parse_label(label).ok_or_else(|| PueError::Parse {
            line: line_no,
            message: format!("unrecognized label `{label}`"),
        })?);
        let mut entries = Vec::new();
        for tok in tokens {
            let bad = |what: &str| PueError::Parse {
                line: line_no,
                message: format!("{what} in `{tok}`"),
            };
            let (idx, val) = tok.split_once(':').ok_or_else(|| bad("missing `:`"))?;
            let idx: usize = idx.parse().map_err(|_| bad("bad feature index"))?;
            if idx == 0 {
                return Err(bad("feature index 0"));
            }
            let val: f64 = val.parse().map_err(|_| bad("bad feature value"))?;
            if !val.is_finite() {
                return Err(bad("non-finite feature value"));
            }
            if let Some(d) = dim {
                if idx > d {
                    return Err(PueError::Dimension {
                        line: line_no,
                        index: idx,
                        dim: d,
                    });
                }
            }
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        rows.push(entries);
    }
    let dim = dim.unwrap_or(max_index);
    if dim == 0 {
        return Err(PueError::EmptySet("no features found".into()));
    }
    let mut features = vec![0.0; rows.len() * dim];
    for (r, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[r * dim + j] = v;
        }
    }
    LabeledSampleSet::new(dim, features)?.with_y_oracle(labels)
}

fn parse_label(s: &str) -> Option<bool> {
    match s.parse::<f64>().ok()? {
        1.0 => Some(true),
        -1.0 | 0.0 | 2.0 => Some(false),
        _ => None,
    }
}

/// Reads a sparse-format file and min-max scales every feature into `[0, 1]`.
pub fn parse_sparse_dataset(path: &Path, dim: Option<usize>) -> Result<LabeledSampleSet> {
    let text = std::fs::read_to_string(path).map_err(|source| PueError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut set = parse_sparse_str(&text, dim)?;
    min_max_scale(&mut set);
    Ok(set)
}

/// Rescales each feature column to `[0, 1]`; constant columns become 0.
pub fn min_max_scale(set: &mut LabeledSampleSet) {
    let d = set.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in set.rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    for row in set.features_mut().chunks_exact_mut(d) {
        for j in 0..d {
            let span = hi[j] - lo[j];
            row[j] = if span > 0.0 {
                (row[j] - lo[j]) / span
            } else {
                0.0
            };
        }
    }
}

/// Exposure mechanism `θ(e=1|x) = min(1, C·σ(x_p g1(x) + (1 − x_p) g2(x)))`
/// with `g(x) = x_a + 2x_b + 3x_c x_d + 4x_e + 5x_f²`.
///
/// Indices are 1-based; an index beyond the data dimension wraps modulo `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureSpec {
    pub target_marginal: f64,
    pub pivot_index: usize,
    /// `[a, b, c, d, e, f]` for g1.
    pub g1_indices: [usize; 6],
    /// `[a, b, c, d, e, f]` for g2.
    pub g2_indices: [usize; 6],
}

impl Default for ExposureSpec {
    fn default() -> Self {
        ExposureSpec {
            target_marginal: 0.5,
            pivot_index: 13,
            g1_indices: [2, 3, 4, 5, 6, 6],
            g2_indices: [7, 8, 9, 10, 11, 12],
        }
    }
}

impl ExposureSpec {
    /// Validates the spec and converts indices to 0-based offsets for `dim` features.
    pub fn resolve(&self, dim: usize) -> Result<ExposureModel> {
        if !(self.target_marginal > 0.0 && self.target_marginal < 1.0) {
            return Err(PueError::Parameter(format!(
                "target marginal {} outside (0, 1)",
                self.target_marginal
            )));
        }
        if dim == 0 {
            return Err(PueError::Parameter("dimension must be positive".into()));
        }
        let fix = |i: usize| -> Result<usize> {
            if i == 0 {
                return Err(PueError::Parameter(
                    "exposure feature indices are 1-based".into(),
                ));
            }
            if i > dim {
                let w = (i - 1) % dim;
                log::warn!(
                    "exposure index {i} exceeds dimension {dim}; using {}",
                    w + 1
                );
                return Ok(w);
            }
            Ok(i - 1)
        };
        let map = |g: &[usize; 6]| -> Result<[usize; 6]> {
            let mut out = [0; 6];
            for (o, &i) in out.iter_mut().zip(g) {
                *o = fix(i)?;
            }
            Ok(out)
        };
        Ok(ExposureModel {
            pivot: fix(self.pivot_index)?,
            g1: map(&self.g1_indices)?,
            g2: map(&self.g2_indices)?,
            dim,
        })
    }
}

/// An [`ExposureSpec`] bound to a feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureModel {
    pivot: usize,
    g1: [usize; 6],
    g2: [usize; 6],
    dim: usize,
}

fn poly(x: &[f64], g: &[usize; 6]) -> f64 {
    x[g[0]] + 2.0 * x[g[1]] + 3.0 * x[g[2]] * x[g[3]] + 4.0 * x[g[4]] + 5.0 * x[g[5]] * x[g[5]]
}

impl ExposureModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `σ(x_p g1(x) + (1 − x_p) g2(x))`, the exposure probability before scaling by `C`.
    pub fn base(&self, x: &[f64]) -> f64 {
        let p = x[self.pivot];
        sigmoid(p * poly(x, &self.g1) + (1.0 - p) * poly(x, &self.g2))
    }

    pub fn probability(&self, x: &[f64], c: f64) -> f64 {
        (c * self.base(x)).min(1.0)
    }
}

pub fn exposure_probability(x: &[f64], spec: &ExposureSpec, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(PueError::Parameter(format!(
            "exposure constant {c} must be positive"
        )));
    }
    Ok(spec.resolve(x.len())?.probability(x, c))
}

const C_MAX: f64 = 1e6;

/// Finds `C` so the mean exposure probability over `data` equals the target.
pub fn calibrate_c(data: &LabeledSampleSet, spec: &ExposureSpec) -> Result<f64> {
    if data.is_empty() {
        return Err(PueError::EmptySet(
            "cannot calibrate on an empty dataset".into(),
        ));
    }
    let model = spec.resolve(data.dim())?;
    let target = spec.target_marginal;
    let base: Vec<f64> = data.rows().map(|x| model.base(x)).collect();
    let mean_at = |c: f64| base.iter().map(|s| (c * s).min(1.0)).sum::<f64>() / base.len() as f64;
    let mean: f64 = base.iter().sum::<f64>() / base.len() as f64;
    let top = base.iter().cloned().fold(0.0, f64::max);
    let c0 = target / mean;
    if c0 * top <= 1.0 {
        return Ok(c0);
    }
    let mut lo = c0;
    let mut hi = c0;
    while mean_at(hi) < target {
        hi *= 2.0;
        if hi > C_MAX {
            if mean_at(C_MAX) < target - 1e-6 {
                return Err(PueError::Calibration(format!(
                    "target marginal {target} unreachable with C ≤ {C_MAX}"
                )));
            }
            hi = C_MAX;
            break;
        }
    }
    let mut c = hi;
    for _ in 0..200 {
        c = 0.5 * (lo + hi);
        let m = mean_at(c);
        if (m - target).abs() <= 1e-6 {
            return Ok(c);
        }
        if m < target {
            lo = c;
        } else {
            hi = c;
        }
    }
    Ok(c)
}

/// Mean of `min(1, C·σ(h(x)))` over `data`.
pub fn mean_exposure(data: &LabeledSampleSet, spec: &ExposureSpec, c: f64) -> Result<f64> {
    let model = spec.resolve(data.dim())?;
    Ok(data.rows().map(|x| model.probability(x, c)).sum::<f64>() / data.len().max(1) as f64)
}

/// Draws `E ~ Bernoulli(θ(e=1|x))` per row and sets `W = E·Y`.
pub fn synthesize_observations(
    data: &LabeledSampleSet,
    spec: &ExposureSpec,
    c: f64,
    seed: u64,
) -> Result<LabeledSampleSet> {
    let y = data.require_y_oracle(Role::Test)?.to_vec();
    if !(c > 0.0) {
        return Err(PueError::Parameter(format!(
            "exposure constant {c} must be positive"
        )));
    }
    let model = spec.resolve(data.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<bool> = data
        .rows()
        .map(|x| rng.gen_bool(model.probability(x, c)))
        .collect();
    let w = e.iter().zip(&y).map(|(&e, &y)| e && y).collect();
    data.clone().without_w().without_e().with_e(e)?.with_w(w)
}

/// Uniformly chosen rows without replacement, or every row (shuffled) if `count ≥ len`.
pub fn subsample(data: &LabeledSampleSet, count: usize, seed: u64) -> LabeledSampleSet {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx.truncate(count);
    data.select(&idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Problem {
    #[serde(rename = "PUE")]
    Pue,
    #[serde(rename = "3SE")]
    ThreeSe,
    #[serde(rename = "PE")]
    Pe,
    #[serde(rename = "FPUE")]
    Fpue,
    #[serde(rename = "SSE")]
    Sse,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Pue => "PUE",
            Problem::ThreeSe => "3SE",
            Problem::Pe => "PE",
            Problem::Fpue => "FPUE",
            Problem::Sse => "SSE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Share of the training pool that goes to the first partition.
    pub split_ratio: f64,
    pub test_count: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            split_ratio: 0.5,
            test_count: 300,
        }
    }
}

/// The datasets of one trial.
///
/// Every set keeps `y_oracle` so evaluation can use it; risks never read it.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub pu: Option<LabeledSampleSet>,
    pub exposure: Option<LabeledSampleSet>,
    pub positive: Option<LabeledSampleSet>,
    pub unlabeled: Option<LabeledSampleSet>,
    pub sse: Option<LabeledSampleSet>,
    pub test: LabeledSampleSet,
    /// Training-pool rows the problem leaves unlabeled.
    pub transductive: LabeledSampleSet,
    /// Fraction of `W = 1` over the training pool.
    pub class_prior: f64,
}

impl SplitData {
    pub fn roles(&self) -> Roles<'_> {
        Roles {
            pu: self.pu.as_ref(),
            exposure: self.exposure.as_ref(),
            positive: self.positive.as_ref(),
            unlabeled: self.unlabeled.as_ref(),
            sse: self.sse.as_ref(),
        }
    }
}

fn range(set: &LabeledSampleSet, lo: usize, hi: usize) -> LabeledSampleSet {
    set.select(&(lo..hi).collect::<Vec<_>>())
}

fn only_positives(set: &LabeledSampleSet) -> LabeledSampleSet {
    let w = set.w().unwrap_or_default().to_vec();
    set.filter(|i| w[i]).without_w().without_e()
}

/// Holds out `test_count` random rows and partitions the rest by `problem`.
///
/// The first partition receives `⌈α·n⌉` rows. PUE: first → D^PU (`w`), second
/// → D^E (`e`). 3SE: first → D^PU (`w`), second → D^SSE (`w`, `e`). PE: the
/// `W = 1` rows of the first → D^P, second → D^E. FPUE: the first partition is
/// halved (ceiling first); positives of its first half → D^P, its second half
/// → D^U, second partition → D^E. SSE: the whole pool → D^SSE.
pub fn split_for_problem(
    data: &LabeledSampleSet,
    problem: Problem,
    split: &SplitSpec,
    seed: u64,
) -> Result<SplitData> {
    data.require_w(Role::PositiveUnlabeled)?;
    data.require_e(Role::Exposure)?;
    data.require_y_oracle(Role::Test)?;
    if !(split.split_ratio > 0.0 && split.split_ratio < 1.0) {
        return Err(PueError::Parameter(format!(
            "split ratio {} outside (0, 1)",
            split.split_ratio
        )));
    }
    let n = data.len();
    if split.test_count == 0 || split.test_count >= n {
        return Err(PueError::Size(format!(
            "test count {} with {n} rows",
            split.test_count
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let test = data
        .select(&idx[..split.test_count])
        .without_w()
        .without_e();
    let pool = data.select(&idx[split.test_count..]);
    let m = pool.len();
    let first = (split.split_ratio * m as f64).ceil() as usize;
    if problem != Problem::Sse && (first == 0 || first >= m) {
        return Err(PueError::Size(format!(
            "cannot split {m} pool rows at ratio {}",
            split.split_ratio
        )));
    }
    let w = pool.w().unwrap_or_default();
    let e = pool.e().unwrap_or_default();
    let class_prior = w.iter().filter(|&&v| v).count() as f64 / m as f64;
    let transductive = match problem {
        Problem::Pue | Problem::Pe | Problem::Fpue => pool.filter(|i| !w[i]),
        Problem::Sse | Problem::ThreeSe => pool.filter(|i| !e[i]),
    }
    .without_w()
    .without_e();

    let mut out = SplitData {
        pu: None,
        exposure: None,
        positive: None,
        unlabeled: None,
        sse: None,
        test,
        transductive,
        class_prior,
    };
    let head = range(&pool, 0, first);
    let tail = range(&pool, first, m);
    match problem {
        Problem::Pue => {
            out.pu = Some(head.without_e());
            out.exposure = Some(tail.without_w());
        }
        Problem::ThreeSe => {
            out.pu = Some(head.without_e());
            out.sse = Some(tail);
        }
        Problem::Pe => {
            out.positive = Some(only_positives(&head));
            out.exposure = Some(tail.without_w());
        }
        Problem::Fpue => {
            let half = first.div_ceil(2);
            if half >= first {
                return Err(PueError::Size(format!(
                    "first partition of {first} rows cannot be halved"
                )));
            }
            out.positive = Some(only_positives(&range(&head, 0, half)));
            out.unlabeled = Some(range(&head, half, first).without_w().without_e());
            out.exposure = Some(tail.without_w());
        }
        Problem::Sse => {
            out.sse = Some(pool);
        }
    }
    if out.positive.as_ref().is_some_and(|p| p.is_empty()) {
        return Err(PueError::Size("no observed positives for D^P".into()));
    }
    Ok(out)
}

/// Writes `w,e,y_oracle,x1..xd` (absent columns omitted) with booleans as 0/1.
pub fn write_csv<W: Write>(set: &LabeledSampleSet, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let cols: Vec<(&str, &[bool])> = [("w", set.w()), ("e", set.e()), ("y_oracle", set.y_oracle())]
        .into_iter()
        .filter_map(|(n, c)| c.map(|c| (n, c)))
        .collect();
    let mut header: Vec<String> = cols.iter().map(|(n, _)| n.to_string()).collect();
    header.extend((1..=set.dim()).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    for (i, row) in set.rows().enumerate() {
        let mut rec: Vec<String> = cols
            .iter()
            .map(|(_, c)| if c[i] { "1" } else { "0" }.to_string())
            .collect();
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv_file(set: &LabeledSampleSet, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|source| PueError::File {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(set, std::io::BufWriter::new(f))
}
