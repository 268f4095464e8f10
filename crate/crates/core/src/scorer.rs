use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSampleSet;
use crate::error::{PueError, Result};
use crate::loss::{classify, logistic, Probability};

/// Linear model with a logistic link: `f(x) = σ(w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    weights: Vec<f64>,
    intercept: f64,
}

impl LinearScorer {
    pub fn zeros(dim: usize) -> Self {
        LinearScorer {
            weights: vec![0.0; dim],
            intercept: 0.0,
        }
    }

    pub fn new(weights: Vec<f64>, intercept: f64) -> Result<Self> {
        if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(PueError::Parameter(
                "scorer parameters must be finite".into(),
            ));
        }
        Ok(LinearScorer { weights, intercept })
    }

    /// Rebuilds a scorer from a flat `[weights..., intercept]` vector.
    pub fn from_params(params: &[f64]) -> Result<Self> {
        match params.split_last() {
            Some((&b, w)) if !w.is_empty() => Self::new(w.to_vec(), b),
            _ => Err(PueError::Parameter(
                "parameter vector needs at least two entries".into(),
            )),
        }
    }

    /// Flat `[weights..., intercept]` vector, the layout gradients use.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.intercept);
        p
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// The pre-link linear score `w·x + b`.
    pub fn linear(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }

    pub fn score(&self, x: &[f64]) -> Probability {
        logistic(self.linear(x))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        classify(self.score(x))
    }

    /// Clamped probabilities for every row of `data`.
    pub fn probabilities(&self, data: &LabeledSampleSet) -> Vec<f64> {
        data.rows().map(|r| self.score(r).value()).collect()
    }
}
