//! Row-major sample container shared by every dataset role.

use crate::error::{Column, PueError, Result, Role};

/// A single finite feature row.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(PueError::InvalidData(format!(
                "non-finite feature value {bad}"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Feature rows plus optional observation columns.
///
/// `w` is the observed-positive indicator `W = E·Y`, `e` the exposure
/// indicator and `y_oracle` the hidden true label. Absent columns are `None`;
/// whenever `w` and `e` are both present `w ⇒ e`, and with all three present
/// `w = e ∧ y` row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSampleSet {
    dim: usize,
    features: Vec<f64>,
    w: Option<Vec<bool>>,
    e: Option<Vec<bool>>,
    y_oracle: Option<Vec<bool>>,
}

impl LabeledSampleSet {
    /// Builds a set from a row-major feature buffer of `n × dim` values.
    pub fn new(dim: usize, features: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(PueError::InvalidData("dimension must be positive".into()));
        }
        if !features.len().is_multiple_of(dim) {
            return Err(PueError::InvalidData(format!(
                "feature buffer of length {} is not a multiple of dimension {dim}",
                features.len()
            )));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(PueError::InvalidData(format!(
                "non-finite feature value {bad}"
            )));
        }
        Ok(LabeledSampleSet {
            dim,
            features,
            w: None,
            e: None,
            y_oracle: None,
        })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut buf = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(PueError::InvalidData(format!(
                    "row {i} has {} values, expected {dim}",
                    r.len()
                )));
            }
            buf.extend_from_slice(r);
        }
        Self::new(dim, buf)
    }

    pub fn with_w(mut self, w: Vec<bool>) -> Result<Self> {
        self.check_len(&w, Column::W)?;
        self.w = Some(w);
        self.check_consistency()?;
        Ok(self)
    }

    pub fn with_e(mut self, e: Vec<bool>) -> Result<Self> {
        self.check_len(&e, Column::E)?;
        self.e = Some(e);
        self.check_consistency()?;
        Ok(self)
    }

    pub fn with_y_oracle(mut self, y: Vec<bool>) -> Result<Self> {
        self.check_len(&y, Column::YOracle)?;
        self.y_oracle = Some(y);
        self.check_consistency()?;
        Ok(self)
    }

    pub fn without_w(mut self) -> Self {
        self.w = None;
        self
    }

    pub fn without_e(mut self) -> Self {
        self.e = None;
        self
    }

    pub fn without_y_oracle(mut self) -> Self {
        self.y_oracle = None;
        self
    }

    fn check_len(&self, col: &[bool], which: Column) -> Result<()> {
        if col.len() != self.len() {
            return Err(PueError::InvalidData(format!(
                "column `{which}` has {} entries for {} rows",
                col.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn check_consistency(&self) -> Result<()> {
        if let (Some(w), Some(e)) = (&self.w, &self.e) {
            if let Some(i) = (0..w.len()).find(|&i| w[i] && !e[i]) {
                return Err(PueError::InvalidData(format!("row {i}: w = 1 but e = 0")));
            }
            if let Some(y) = &self.y_oracle {
                if let Some(i) = (0..w.len()).find(|&i| w[i] != (e[i] && y[i])) {
                    return Err(PueError::InvalidData(format!("row {i}: w != e·y")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn w(&self) -> Option<&[bool]> {
        self.w.as_deref()
    }

    pub fn e(&self) -> Option<&[bool]> {
        self.e.as_deref()
    }

    pub fn y_oracle(&self) -> Option<&[bool]> {
        self.y_oracle.as_deref()
    }

    pub fn require_w(&self, role: Role) -> Result<&[bool]> {
        self.w().ok_or(PueError::MissingColumn {
            role,
            column: Column::W,
        })
    }

    pub fn require_e(&self, role: Role) -> Result<&[bool]> {
        self.e().ok_or(PueError::MissingColumn {
            role,
            column: Column::E,
        })
    }

    pub fn require_y_oracle(&self, role: Role) -> Result<&[bool]> {
        self.y_oracle().ok_or(PueError::MissingColumn {
            role,
            column: Column::YOracle,
        })
    }

    /// Rows at `indices`, in that order, with every present column carried along.
    pub fn select(&self, indices: &[usize]) -> LabeledSampleSet {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let pick =
            |c: &Option<Vec<bool>>| c.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect());
        LabeledSampleSet {
            dim: self.dim,
            features,
            w: pick(&self.w),
            e: pick(&self.e),
            y_oracle: pick(&self.y_oracle),
        }
    }

    /// Rows for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> LabeledSampleSet {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.select(&idx)
    }

    /// Mutable access to the feature buffer, for in-place rescaling.
    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }
}
