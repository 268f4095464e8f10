//! Link function and log loss.
//!
//! Losses use the negative-log convention, `ℓ(f, 1) = −ln f` and
//! `ℓ(f, 0) = −ln(1 − f)`, so every risk built on them is minimized.

/// Lower clamp for probabilities fed to the log loss; the upper clamp is `1 − EPSILON`.
pub const EPSILON: f64 = 1e-7;

/// A probability clamped into `[EPSILON, 1 − EPSILON]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    /// Clamps `value` into the admissible range. NaN is mapped to 0.5.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            return Probability(0.5);
        }
        Probability(value.clamp(EPSILON, 1.0 - EPSILON))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Unclamped `1 / (1 + e^{−z})`, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic link clamped into `[EPSILON, 1 − EPSILON]`.
pub fn logistic(z: f64) -> Probability {
    debug_assert!(z.is_finite(), "logistic of non-finite score {z}");
    Probability::clamped(sigmoid(z))
}

/// `−ln f` for a positive target, `−ln(1 − f)` for a negative one.
pub fn log_loss(f: Probability, positive: bool) -> f64 {
    if positive {
        -f.0.ln()
    } else {
        -(1.0 - f.0).ln()
    }
}

/// `1[f ≥ 1/2]`.
pub fn classify(f: Probability) -> bool {
    f.0 >= 0.5
}
