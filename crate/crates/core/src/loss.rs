//! Consistency loss over a (sufficient, necessary) probability pair, its
//! closed-form gradient, and the joint objective with a task loss.
//!
//! The loss `-(1 - p2) ln(1 - p1) - p1 ln(p2)` is unbounded as `p1 -> 1`
//! with `p2 < 1` and as `p2 -> 0` with `p1 > 0`, so both probabilities are
//! clamped to `[eps, 1 - eps]` before evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Probabilities the model assigns to the sufficient (`pi1`) and the
/// necessary (`pi2`) proposition of one implication arrow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropPair {
    pub pi1: f64,
    pub pi2: f64,
}

impl PropPair {
    pub fn new(pi1: f64, pi2: f64) -> Self {
        Self { pi1, pi2 }
    }

    pub fn clamped(self, epsilon: f64) -> Self {
        Self {
            pi1: clamp_prob(self.pi1, epsilon),
            pi2: clamp_prob(self.pi2, epsilon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl LossConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let c = Self {
            lambda,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

pub fn clamp_prob(p: f64, epsilon: f64) -> f64 {
    p.clamp(epsilon, 1.0 - epsilon)
}

pub fn cons_loss(pair: PropPair, config: &LossConfig) -> f64 {
    let PropPair { pi1, pi2 } = pair.clamped(config.epsilon);
    -(1.0 - pi2) * (-pi1).ln_1p() - pi1 * pi2.ln()
}

/// Partial derivatives `(dL/dpi1, dL/dpi2)` at the clamped point.
pub fn cons_loss_grad(pair: PropPair, config: &LossConfig) -> (f64, f64) {
    let PropPair { pi1, pi2 } = pair.clamped(config.epsilon);
    let g1 = (1.0 - pi2) / (1.0 - pi1) - pi2.ln();
    let g2 = (-pi1).ln_1p() - pi1 / pi2;
    (g1, g2)
}

/// `task_loss + lambda * mean(cons_loss)`; the mean over an empty slice
/// contributes nothing.
pub fn joint_loss(task_loss: f64, pairs: &[PropPair], config: &LossConfig) -> f64 {
    if pairs.is_empty() {
        return task_loss;
    }
    let mean = pairs.iter().map(|&p| cons_loss(p, config)).sum::<f64>() / pairs.len() as f64;
    task_loss + config.lambda * mean
}
