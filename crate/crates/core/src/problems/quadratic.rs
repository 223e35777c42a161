use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Optimum, Problem};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::state::{GradientSnapshot, LayerPartition};

const MAX_DENSE: usize = 50;

/// Symmetric positive definite matrix, diagonal or small dense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpdMatrix {
    Diagonal(Vec<f64>),
    Dense(Vec<Vec<f64>>),
}

impl SpdMatrix {
    fn dim(&self) -> usize {
        match self {
            SpdMatrix::Diagonal(d) => d.len(),
            SpdMatrix::Dense(rows) => rows.len(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SpdMatrix::Diagonal(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            SpdMatrix::Dense(rows) => rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect(),
        }
    }
}

/// `f(θ) = ½ θᵀAθ - bᵀθ` with `A` SPD.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a: SpdMatrix,
    b: Vec<f64>,
    partition: LayerPartition,
    radius: Option<f64>,
    optimum: Optimum,
    init: Option<Vec<f64>>,
}

impl QuadraticProblem {
    pub fn new(a: SpdMatrix, b: Vec<f64>) -> Result<Self> {
        let d = a.dim();
        if d == 0 {
            return Err(Error::Problem("quadratic needs d >= 1".into()));
        }
        if b.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: b.len(),
            });
        }
        let theta = match &a {
            SpdMatrix::Diagonal(diag) => {
                if let Some(i) = diag.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::NotSpd(format!("diagonal entry {i} is {}", diag[i])));
                }
                b.iter().zip(diag).map(|(bi, ai)| bi / ai).collect::<Vec<_>>()
            }
            SpdMatrix::Dense(rows) => {
                if d > MAX_DENSE {
                    return Err(Error::Problem(format!(
                        "dense matrices are capped at {MAX_DENSE}x{MAX_DENSE}"
                    )));
                }
                if rows.iter().any(|r| r.len() != d) {
                    return Err(Error::NotSpd("matrix is not square".into()));
                }
                let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
                for i in 0..d {
                    for j in 0..i {
                        if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (m[(i, j)].abs() + m[(j, i)].abs()).max(1.0) {
                            return Err(Error::NotSpd(format!("entry ({i},{j}) breaks symmetry")));
                        }
                    }
                }
                let chol = m
                    .cholesky()
                    .ok_or_else(|| Error::NotSpd("Cholesky factorisation failed".into()))?;
                chol.solve(&DVector::from_column_slice(&b)).iter().copied().collect()
            }
        };
        let value = -0.5 * b.iter().zip(&theta).map(|(x, y)| x * y).sum::<f64>();
        Ok(Self {
            a,
            b,
            partition: LayerPartition::single(d)?,
            radius: None,
            optimum: Optimum { theta, value },
            init: None,
        })
    }

    pub fn with_partition(mut self, sizes: &[usize]) -> Result<Self> {
        let p = LayerPartition::new(sizes)?;
        p.check_len(self.b.len())?;
        self.partition = p;
        Ok(self)
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Problem(format!(
                "projection radius must be positive, got {radius}"
            )));
        }
        self.radius = Some(radius);
        Ok(self)
    }

    /// Fixed starting point instead of a random one.
    pub fn with_initial(mut self, theta0: Vec<f64>) -> Result<Self> {
        self.partition.check_len(theta0.len())?;
        self.init = Some(theta0);
        Ok(self)
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn partition(&self) -> &LayerPartition {
        &self.partition
    }

    fn batch_loss(&self, theta: &[f64], _batch: Option<&[usize]>) -> f64 {
        let at = self.a.apply(theta);
        let quad: f64 = theta.iter().zip(&at).map(|(x, y)| x * y).sum();
        let lin: f64 = theta.iter().zip(&self.b).map(|(x, y)| x * y).sum();
        0.5 * quad - lin
    }

    fn gradient(&self, theta: &[f64], _batch: Option<&[usize]>) -> GradientSnapshot {
        let at = self.a.apply(theta);
        GradientSnapshot::new(at.iter().zip(&self.b).map(|(x, y)| x - y).collect())
    }

    fn optimum(&self) -> Option<Optimum> {
        Some(self.optimum.clone())
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn projection_radius(&self) -> Option<f64> {
        self.radius
    }

    fn initial_params(&self, rng: &mut CounterRng) -> Vec<f64> {
        match &self.init {
            Some(t) => t.clone(),
            None => (0..self.b.len()).map(|_| rng.next_normal()).collect(),
        }
    }
}
