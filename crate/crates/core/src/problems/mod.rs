//! Desk-scale objectives with analytic gradients.
//!
//! Convex instances (quadratics, logistic regression) feed the regret-bound
//! checks; small fully-connected networks provide enough parameter tensors
//! for layerwise stepsize traces. In every model a weight matrix and its bias
//! vector are separate partition entries.

pub mod data;
mod logistic;
mod mlp;
mod quadratic;

pub use data::{epoch_batches, load_csv_dataset, make_two_moons, Dataset};
pub use logistic::LogisticRegression;
pub use mlp::{Activation, Mlp};
pub use quadratic::{QuadraticProblem, SpdMatrix};

use crate::error::Result;
use crate::rng::CounterRng;
use crate::state::{GradientSnapshot, LayerPartition};

/// Loss (and accuracy, for classifiers) of a parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: Option<f64>,
}

/// A known minimiser and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub theta: Vec<f64>,
    pub value: f64,
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;

    fn partition(&self) -> &LayerPartition;

    fn dim(&self) -> usize {
        self.partition().dim()
    }

    /// Number of training samples; `0` for objectives without data.
    fn num_samples(&self) -> usize {
        0
    }

    /// Objective on a minibatch (`None` = all samples).
    fn batch_loss(&self, theta: &[f64], batch: Option<&[usize]>) -> f64;

    /// Gradient of [`Problem::batch_loss`].
    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> GradientSnapshot;

    fn loss(&self, theta: &[f64]) -> f64 {
        self.batch_loss(theta, None)
    }

    /// Loss and accuracy on the training data.
    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        Evaluation {
            loss: self.loss(theta),
            accuracy: None,
        }
    }

    /// Loss and accuracy on another dataset with the same layout.
    fn evaluate_on(&self, theta: &[f64], _data: &Dataset) -> Result<Evaluation> {
        Ok(self.evaluate(theta))
    }

    fn optimum(&self) -> Option<Optimum> {
        None
    }

    fn is_convex(&self) -> bool;

    /// Radius `D` of the feasible ball, if the problem is constrained.
    fn projection_radius(&self) -> Option<f64> {
        None
    }

    fn initial_params(&self, rng: &mut CounterRng) -> Vec<f64>;
}

/// Euclidean projection onto `{θ : ‖θ‖₂ ≤ radius}`.
pub fn project_to_ball(theta: &mut [f64], radius: f64) {
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        for x in theta {
            *x *= s;
        }
    }
}

#[cfg(test)]
pub(crate) use tests::{fd_gradient, rel_err};
