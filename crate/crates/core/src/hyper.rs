//! Hyperparameters and the common-stepsize schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Common stepsize schedule `η_t`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `η_t = η`.
    #[default]
    Constant,
    /// `η_t = η * factor^k` where `k` counts the milestones `<= epoch`.
    StepDecay { milestones: Vec<usize>, factor: f64 },
    /// `η_t = η / sqrt(t)`.
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDecayMode {
    #[default]
    None,
    /// Classic L2: `wd * θ` is added to the gradient before the momenta.
    Coupled,
    /// AdamW-style: `θ -= η_t * wd * θ_{t-1}` alongside the adaptive step.
    Decoupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub eta: f64,
    pub schedule: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    /// First-moment decay `β_{1t} = β1 * λ^(t-1)`; `1.0` keeps `β1` fixed.
    pub lambda: f64,
    pub epsilon: f64,
    pub tau: f64,
    /// Exponent `n` of the down-scaling factor `cos^n`. `0` disables
    /// down-scaling (`cos^0 ≡ 1`).
    pub cos_exponent: u32,
    pub weight_decay: f64,
    pub weight_decay_mode: WeightDecayMode,
    /// Divide the first momentum by `1 - β1^t`. Off in theoretical mode.
    pub first_moment_bias_correction: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            schedule: Schedule::Constant,
            beta1: 0.9,
            beta2: 0.999,
            lambda: 1.0,
            epsilon: 1e-8,
            tau: 0.5,
            cos_exponent: 2,
            weight_decay: 0.0,
            weight_decay_mode: WeightDecayMode::None,
            first_moment_bias_correction: true,
        }
    }
}

fn bad(name: &'static str, reason: impl Into<String>) -> Error {
    Error::HyperParam {
        name,
        reason: reason.into(),
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(bad("eta", format!("must be positive, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(bad("beta1", format!("must lie in [0, 1), got {}", self.beta1)));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(bad("beta2", format!("must lie in [0, 1), got {}", self.beta2)));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(bad("lambda", format!("must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(bad("epsilon", format!("must be > 0, got {}", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(bad("tau", format!("must lie in [0, 1), got {}", self.tau)));
        }
        if ![0, 2, 4].contains(&self.cos_exponent) {
            return Err(bad(
                "cos_exponent",
                format!("must be 0, 2 or 4, got {}", self.cos_exponent),
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(bad("weight_decay", "must be a nonnegative number"));
        }
        if let Schedule::StepDecay { factor, .. } = &self.schedule {
            if !(factor.is_finite() && *factor > 0.0) {
                return Err(bad("schedule.factor", "must be positive"));
            }
        }
        Ok(())
    }

    /// `β_{1t} = β1 * λ^(t-1)`.
    pub fn beta1_at(&self, t: u64) -> f64 {
        if self.lambda == 1.0 || t == 0 {
            self.beta1
        } else {
            self.beta1 * self.lambda.powf((t - 1) as f64)
        }
    }

    pub fn stepsize(&self, t: u64, epoch: usize) -> Result<f64> {
        schedule_stepsize(self, t, epoch)
    }
}

/// Common stepsize `η_t` at (1-based) iteration `t` during `epoch`.
pub fn schedule_stepsize(hp: &HyperParams, t: u64, epoch: usize) -> Result<f64> {
    match &hp.schedule {
        Schedule::Constant => Ok(hp.eta),
        Schedule::StepDecay { milestones, factor } => {
            let passed = milestones.iter().filter(|&&m| epoch >= m).count();
            Ok(hp.eta * factor.powi(passed as i32))
        }
        Schedule::InverseSqrt => {
            if t == 0 {
                return Err(Error::ZeroIteration("inverse-sqrt schedule"));
            }
            Ok(hp.eta / (t as f64).sqrt())
        }
    }
}
