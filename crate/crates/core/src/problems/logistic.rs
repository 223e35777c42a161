use super::{Dataset, Evaluation, Problem};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::state::{GradientSnapshot, LayerPartition};

/// Binary logistic regression with an L2 penalty on the weights (not the
/// bias). Partition: `[weights, bias]`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: Dataset,
    l2: f64,
    partition: LayerPartition,
    /// Set when every training label is the same class.
    pub single_class: bool,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    pub fn new(data: Dataset, l2: f64) -> Result<Self> {
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::Problem(format!("l2 must be >= 0, got {l2}")));
        }
        if let Some(i) = data.labels().iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::DatasetRow {
                row: i + 1,
                reason: format!("label {} is not in {{0, 1}}", data.label(i)),
            });
        }
        let p = data.num_features();
        Ok(Self {
            single_class: data.is_single_class(),
            partition: LayerPartition::new(&[p, 1])?,
            data,
            l2,
        })
    }

    fn logit(&self, theta: &[f64], x: &[f64]) -> f64 {
        let p = x.len();
        theta[..p].iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + theta[p]
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        let p = self.data.num_features();
        0.5 * self.l2 * theta[..p].iter().map(|w| w * w).sum::<f64>()
    }

    fn data_loss(&self, theta: &[f64], data: &Dataset, rows: impl Iterator<Item = usize>) -> (f64, usize, usize) {
        let (mut total, mut count, mut correct) = (0.0, 0usize, 0usize);
        for i in rows {
            let z = self.logit(theta, data.row(i));
            let y = data.label(i);
            total += softplus(z) - y * z;
            count += 1;
            if (z >= 0.0) == (y == 1.0) {
                correct += 1;
            }
        }
        (total, count, correct)
    }
}

impl Problem for LogisticRegression {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn partition(&self) -> &LayerPartition {
        &self.partition
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn batch_loss(&self, theta: &[f64], batch: Option<&[usize]>) -> f64 {
        let (total, count, _) = match batch {
            Some(b) => self.data_loss(theta, &self.data, b.iter().copied()),
            None => self.data_loss(theta, &self.data, 0..self.data.len()),
        };
        total / count as f64 + self.penalty(theta)
    }

    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> GradientSnapshot {
        let p = self.data.num_features();
        let mut g = vec![0.0; p + 1];
        let all: Vec<usize>;
        let rows = match batch {
            Some(b) => b,
            None => {
                all = (0..self.data.len()).collect();
                &all
            }
        };
        for &i in rows {
            let x = self.data.row(i);
            let r = sigmoid(self.logit(theta, x)) - self.data.label(i);
            for (gj, xj) in g[..p].iter_mut().zip(x) {
                *gj += r * xj;
            }
            g[p] += r;
        }
        let n = rows.len() as f64;
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= n;
            if j < p {
                *gj += self.l2 * theta[j];
            }
        }
        GradientSnapshot::new(g)
    }

    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        self.evaluate_on(theta, &self.data)
            .expect("training data matches layout")
    }

    fn evaluate_on(&self, theta: &[f64], data: &Dataset) -> Result<Evaluation> {
        if data.num_features() != self.data.num_features() {
            return Err(Error::Dimension {
                expected: self.data.num_features(),
                actual: data.num_features(),
            });
        }
        let (total, count, correct) = self.data_loss(theta, data, 0..data.len());
        Ok(Evaluation {
            loss: total / count as f64 + self.penalty(theta),
            accuracy: Some(correct as f64 / count as f64),
        })
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn initial_params(&self, _rng: &mut CounterRng) -> Vec<f64> {
        vec![0.0; self.partition.dim()]
    }
}
