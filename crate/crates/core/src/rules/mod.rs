//! Optimizer update rules: SGD with momentum, Adam, Adam* (ε inside the
//! root), AdaBelief in its original and reformulated forms, and SET-Adam.
//!
//! Every rule increments `state.t` first and then evaluates `η_t`, `β_{1t}`
//! and the bias corrections at the incremented counter. A step whose inputs
//! fail validation leaves both the parameters and the state untouched.

pub mod ops;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::{HyperParams, WeightDecayMode};
use crate::state::{check_finite, GradientSnapshot, LayerPartition, ModelParams, MomentState};

pub use ops::{angle_deg, cos2_angle, down_scale, down_translate, eps_embed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "sgd_momentum")]
    SgdMomentum,
    #[serde(rename = "adam")]
    Adam,
    #[serde(rename = "adam_star")]
    AdamStar,
    #[serde(rename = "adabelief")]
    AdaBelief,
    #[serde(rename = "adabelief_reformulated")]
    AdaBeliefReformulated,
    #[serde(rename = "set_adam")]
    SetAdam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::SgdMomentum,
        OptimizerKind::Adam,
        OptimizerKind::AdamStar,
        OptimizerKind::AdaBelief,
        OptimizerKind::AdaBeliefReformulated,
        OptimizerKind::SetAdam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::SgdMomentum => "sgd_momentum",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamStar => "adam_star",
            OptimizerKind::AdaBelief => "adabelief",
            OptimizerKind::AdaBeliefReformulated => "adabelief_reformulated",
            OptimizerKind::SetAdam => "set_adam",
        }
    }

    pub fn is_adaptive(self) -> bool {
        self != OptimizerKind::SgdMomentum
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// AdaBelief variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaBeliefForm {
    /// `ε` added to `s_t` every step, no `ε` in the denominator.
    Original,
    /// `ε / (1 - β2)` inside the square root of the denominator.
    Reformulated,
}

/// Result of one update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Post-increment iteration counter.
    pub t: u64,
    /// Common stepsize used at this step.
    pub eta_t: f64,
    /// Per-coordinate denominator applied to the (bias-corrected) first
    /// momentum. SGD reports `1`.
    pub denom: Vec<f64>,
    /// Effective stepsizes `η_t / denom`.
    pub alpha: Vec<f64>,
    /// Per-layer down-scaling factor actually applied (`1` for rules without
    /// down-scaling).
    pub gamma: Vec<f64>,
    /// Per-layer `cos²` of the angle between the second momentum and the
    /// all-one vector, recorded for every adaptive rule.
    pub cos2: Vec<f64>,
}

impl StepOutput {
    /// Stepsizes without the common factor `η_t`, i.e. `1 / denom`.
    pub fn unit_alpha(&self) -> impl Iterator<Item = f64> + '_ {
        self.denom.iter().map(|d| 1.0 / d)
    }
}

struct Prepared {
    t: u64,
    eta_t: f64,
    beta1_t: f64,
    grad: Vec<f64>,
}

fn prepare(
    params: &ModelParams,
    grads: &GradientSnapshot,
    state: &MomentState,
    hp: &HyperParams,
    epoch: usize,
) -> Result<Prepared> {
    hp.validate()?;
    let d = params.dim();
    if grads.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            actual: grads.dim(),
        });
    }
    if state.dim() != d || state.second.len() != d {
        return Err(Error::Dimension {
            expected: d,
            actual: state.dim(),
        });
    }
    check_finite(&grads.values, "gradient")?;
    let t = state.t + 1;
    let eta_t = hp.stepsize(t, epoch)?;
    let mut grad = grads.values.clone();
    if hp.weight_decay_mode == WeightDecayMode::Coupled && hp.weight_decay > 0.0 {
        for (g, &p) in grad.iter_mut().zip(&params.values) {
            *g += hp.weight_decay * p;
        }
    }
    Ok(Prepared {
        t,
        eta_t,
        beta1_t: hp.beta1_at(t),
        grad,
    })
}

fn first_moment_scale(hp: &HyperParams, t: u64) -> f64 {
    if hp.first_moment_bias_correction {
        1.0 / (1.0 - hp.beta1.powi(t.min(i32::MAX as u64) as i32))
    } else {
        1.0
    }
}

fn second_bias(beta2: f64, t: u64) -> f64 {
    1.0 - beta2.powi(t.min(i32::MAX as u64) as i32)
}

/// Apply `θ -= η_t * scale * m / denom`, plus decoupled decay, then commit.
fn apply_update(
    params: &mut ModelParams,
    first: &[f64],
    denom: &[f64],
    scale: f64,
    eta_t: f64,
    hp: &HyperParams,
) -> Result<()> {
    let decay = match hp.weight_decay_mode {
        WeightDecayMode::Decoupled => eta_t * hp.weight_decay,
        _ => 0.0,
    };
    let mut next = params.values.clone();
    for (((p, &m), &den), &old) in next.iter_mut().zip(first).zip(denom).zip(&params.values) {
        debug_assert!(den > 0.0, "non-positive denominator {den}");
        *p -= eta_t * (scale * m) / den;
        if decay != 0.0 {
            *p -= decay * old;
        }
    }
    check_finite(&next, "updated parameters")?;
    params.values = next;
    Ok(())
}

fn layer_cos2(partition: &LayerPartition, second: &[f64]) -> Result<Vec<f64>> {
    partition.layers(second).map(|v| cos2_angle(v, 2)).collect()
}

fn output(t: u64, eta_t: f64, denom: Vec<f64>, gamma: Vec<f64>, cos2: Vec<f64>) -> StepOutput {
    let alpha = denom.iter().map(|d| eta_t / d).collect();
    StepOutput {
        t,
        eta_t,
        denom,
        alpha,
        gamma,
        cos2,
    }
}

/// Heavy-ball momentum: `m ← β m + g`, `θ ← θ - η_t m` (no dampening).
pub fn sgd_momentum_step(
    params: &mut ModelParams,
    grads: &GradientSnapshot,
    state: &mut MomentState,
    hp: &HyperParams,
    epoch: usize,
) -> Result<StepOutput> {
    let prep = prepare(params, grads, state, hp, epoch)?;
    let first: Vec<f64> = state
        .first
        .iter()
        .zip(&prep.grad)
        .map(|(&m, &g)| prep.beta1_t * m + g)
        .collect();
    let denom = vec![1.0; first.len()];
    apply_update(params, &first, &denom, 1.0, prep.eta_t, hp)?;
    state.first = first;
    state.t = prep.t;
    let layers = params.partition().num_layers();
    Ok(output(prep.t, prep.eta_t, denom, vec![1.0; layers], vec![1.0; layers]))
}

fn ema_first(state: &MomentState, grad: &[f64], beta1_t: f64) -> Vec<f64> {
    state
        .first
        .iter()
        .zip(grad)
        .map(|(&m, &g)| beta1_t * m + (1.0 - beta1_t) * g)
        .collect()
}

fn ema_second(state: &MomentState, grad: &[f64], beta2: f64) -> Vec<f64> {
    state
        .second
        .iter()
        .zip(grad)
        .map(|(&v, &g)| beta2 * v + (1.0 - beta2) * g * g)
        .collect()
}

/// Adam with `ε` outside the square root.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &GradientSnapshot,
    state: &mut MomentState,
    hp: &HyperParams,
    epoch: usize,
) -> Result<StepOutput> {
    let prep = prepare(params, grads, state, hp, epoch)?;
    let first = ema_first(state, &prep.grad, prep.beta1_t);
    let second = ema_second(state, &prep.grad, hp.beta2);
    let bc2 = second_bias(hp.beta2, prep.t);
    let denom: Vec<f64> = second.iter().map(|&v| (v / bc2).sqrt() + hp.epsilon).collect();
    let cos2 = layer_cos2(params.partition(), &second)?;
    let scale = first_moment_scale(hp, prep.t);
    apply_update(params, &first, &denom, scale, prep.eta_t, hp)?;
    state.first = first;
    state.second = second;
    state.t = prep.t;
    let gamma = vec![1.0; cos2.len()];
    Ok(output(prep.t, prep.eta_t, denom, gamma, cos2))
}

/// Adam* with `ε` inside the square root.
pub fn adam_star_step(
    params: &mut ModelParams,
    grads: &GradientSnapshot,
    state: &mut MomentState,
    hp: &HyperParams,
    epoch: usize,
) -> Result<StepOutput> {
    let prep = prepare(params, grads, state, hp, epoch)?;
    let first = ema_first(state, &prep.grad, prep.beta1_t);
    let second = ema_second(state, &prep.grad, hp.beta2);
    let bc2 = second_bias(hp.beta2, prep.t);
    let denom: Vec<f64> = second.iter().map(|&v| (v / bc2 + hp.epsilon).sqrt()).collect();
    let cos2 = layer_cos2(params.partition(), &second)?;
    let scale = first_moment_scale(hp, prep.t);
    apply_update(params, &first, &denom, scale, prep.eta_t, hp)?;
    state.first = first;
    state.second = second;
    state.t = prep.t;
    let gamma = vec![1.0; cos2.len()];
    Ok(output(prep.t, prep.eta_t, denom, gamma, cos2))
}

/// AdaBelief, tracking the EMA of `(m_t - g_t)²`.
pub fn adabelief_step(
    params: &mut ModelParams,
    grads: &GradientSnapshot,
    state: &mut MomentState,
    hp: &HyperParams,
    epoch: usize,
    form: AdaBeliefForm,
) -> Result<StepOutput> {
    let prep = prepare(params, grads, state, hp, epoch)?;
    let first = ema_first(state, &prep.grad, prep.beta1_t);
    let per_step_eps = match form {
        AdaBeliefForm::Original => hp.epsilon,
        AdaBeliefForm::Reformulated => 0.0,
    };
    let second: Vec<f64> = state
        .second
        .iter()
        .zip(first.iter().zip(&prep.grad))
        .map(|(&s, (&m, &g))| hp.beta2 * s + (1.0 - hp.beta2) * (m - g) * (m - g) + per_step_eps)
        .collect();
    let bc2 = second_bias(hp.beta2, prep.t);
    let denom: Vec<f64> = match form {
        AdaBeliefForm::Original => second.iter().map(|&s| (s / bc2).sqrt()).collect(),
        AdaBeliefForm::Reformulated => {
            let embedded = hp.epsilon / (1.0 - hp.beta2);
            second.iter().map(|&s| (s / bc2 + embedded).sqrt()).collect()
        }
    };
    let cos2 = layer_cos2(params.partition(), &second)?;
    let scale = first_moment_scale(hp, prep.t);
    apply_update(params, &first, &denom, scale, prep.eta_t, hp)?;
    state.first = first;
    state.second = second;
    state.t = prep.t;
    let gamma = vec![1.0; cos2.len()];
    Ok(output(prep.t, prep.eta_t, denom, gamma, cos2))
}

/// SET-Adam: per layer, down-scale `v` by `cos^n(∠ v 1)`, embed `ε` inside
/// the bias-corrected root, then subtract `τ` times the layer minimum.
pub fn set_adam_step(
    params: &mut ModelParams,
    grads: &GradientSnapshot,
    state: &mut MomentState,
    hp: &HyperParams,
    epoch: usize,
) -> Result<StepOutput> {
    let prep = prepare(params, grads, state, hp, epoch)?;
    let first = ema_first(state, &prep.grad, prep.beta1_t);
    let second = ema_second(state, &prep.grad, hp.beta2);
    let partition = params.partition().clone();
    let d = partition.dim();

    let mut scaled = std::mem::take(&mut state.scratch.scaled);
    let mut embedded = std::mem::take(&mut state.scratch.embedded);
    let mut translated = std::mem::take(&mut state.scratch.translated);
    for buf in [&mut scaled, &mut embedded, &mut translated] {
        buf.clear();
        buf.resize(d, 0.0);
    }

    let mut gamma = Vec::with_capacity(partition.num_layers());
    let mut cos2 = Vec::with_capacity(partition.num_layers());
    let layered = (|| -> Result<()> {
        for l in 0..partition.num_layers() {
            let r = partition.range(l)?;
            let v_l = &second[r.clone()];
            let c2 = cos2_angle(v_l, 2)?;
            let g = if hp.cos_exponent == 2 {
                c2
            } else {
                cos2_angle(v_l, hp.cos_exponent)?
            };
            ops::down_scale_into(v_l, g, &mut scaled[r.clone()]);
            ops::eps_embed_into(
                &scaled[r.clone()],
                prep.t,
                hp.beta2,
                hp.epsilon,
                &mut embedded[r.clone()],
            )?;
            ops::down_translate_into(&embedded[r.clone()], hp.tau, &mut translated[r])?;
            gamma.push(g);
            cos2.push(c2);
        }
        Ok(())
    })();
    let applied = layered.and_then(|_| {
        let scale = first_moment_scale(hp, prep.t);
        apply_update(params, &first, &translated, scale, prep.eta_t, hp)
    });
    let denom = translated.clone();
    state.scratch.scaled = scaled;
    state.scratch.embedded = embedded;
    state.scratch.translated = translated;
    applied?;

    state.first = first;
    state.second = second;
    state.t = prep.t;
    Ok(output(prep.t, prep.eta_t, denom, gamma, cos2))
}

/// Dispatch one step for `kind`.
pub fn step(
    kind: OptimizerKind,
    params: &mut ModelParams,
    grads: &GradientSnapshot,
    state: &mut MomentState,
    hp: &HyperParams,
    epoch: usize,
) -> Result<StepOutput> {
    match kind {
        OptimizerKind::SgdMomentum => sgd_momentum_step(params, grads, state, hp, epoch),
        OptimizerKind::Adam => adam_step(params, grads, state, hp, epoch),
        OptimizerKind::AdamStar => adam_star_step(params, grads, state, hp, epoch),
        OptimizerKind::AdaBelief => adabelief_step(params, grads, state, hp, epoch, AdaBeliefForm::Original),
        OptimizerKind::AdaBeliefReformulated => {
            adabelief_step(params, grads, state, hp, epoch, AdaBeliefForm::Reformulated)
        }
        OptimizerKind::SetAdam => set_adam_step(params, grads, state, hp, epoch),
    }
}

/// An optimizer kind bundled with its hyperparameters and state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub hp: HyperParams,
    pub state: MomentState,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, hp: HyperParams, dim: usize) -> Result<Self> {
        hp.validate()?;
        Ok(Self {
            kind,
            hp,
            state: MomentState::new(dim),
        })
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &GradientSnapshot, epoch: usize) -> Result<StepOutput> {
        step(self.kind, params, grads, &mut self.state, &self.hp, epoch)
    }
}

#[cfg(test)]
mod tests;
