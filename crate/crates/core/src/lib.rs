//! Layer-aware adaptive optimizers.
//!
//! SET-Adam processes Adam's second momentum layer by layer before it is
//! used: it down-scales each layer's subvector by the squared cosine of its
//! angle to the all-one vector, embeds `ε` inside the square root, and
//! down-translates the resulting denominators by a fraction `τ` of their
//! layer minimum. The crate also ships the baselines it is compared with
//! (SGD with momentum, Adam, Adam*, AdaBelief), per-layer stepsize
//! instrumentation, desk-scale problems with analytic gradients, numerical
//! checks of the convex regret bound, and an experiment harness.

pub mod error;
pub mod harness;
pub mod hyper;
pub mod instrument;
pub mod problems;
pub mod rng;
pub mod rules;
pub mod state;
pub mod theory;

pub use error::{Error, Result};
pub use hyper::{schedule_stepsize, HyperParams, Schedule, WeightDecayMode};
pub use rng::CounterRng;
pub use rules::{AdaBeliefForm, Optimizer, OptimizerKind, StepOutput};
pub use state::{GradientSnapshot, LayerPartition, ModelParams, MomentState};
