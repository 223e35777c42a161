use serde::{Deserialize, Serialize};

use super::{Dataset, Evaluation, Problem};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::state::{GradientSnapshot, LayerPartition};

const MAX_DIM: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation; ReLU uses 0 at 0.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully-connected classifier with softmax cross-entropy.
///
/// Parameters are laid out `[W1, b1, W2, b2, ...]`, each `W` row-major with
/// shape `out x in`. Labels are class indices `0..K-1` where `K` is the last
/// width.
#[derive(Debug, Clone)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    data: Dataset,
    partition: LayerPartition,
}

struct Tape {
    /// Pre-activations per hidden/output layer.
    z: Vec<Vec<f64>>,
    /// Activations, `a[0]` is the input.
    a: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(widths: &[usize], activation: Activation, data: Dataset) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Problem(format!(
                "need at least two positive widths, got {widths:?}"
            )));
        }
        if widths[0] != data.num_features() {
            return Err(Error::Problem(format!(
                "input width {} does not match {} dataset features",
                widths[0],
                data.num_features()
            )));
        }
        let classes = *widths.last().unwrap();
        if classes < 2 {
            return Err(Error::Problem("output width must be at least 2 classes".into()));
        }
        if let Some(i) = data
            .labels()
            .iter()
            .position(|&y| y < 0.0 || y.fract() != 0.0 || y >= classes as f64)
        {
            return Err(Error::DatasetRow {
                row: i + 1,
                reason: format!("label {} is not a class index below {classes}", data.label(i)),
            });
        }
        let sizes: Vec<usize> = widths.windows(2).flat_map(|w| [w[0] * w[1], w[1]]).collect();
        let partition = LayerPartition::new(&sizes)?;
        if partition.dim() > MAX_DIM {
            return Err(Error::Problem(format!(
                "network has {} parameters, cap is {MAX_DIM}",
                partition.dim()
            )));
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            data,
            partition,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    fn span(&self, l: usize) -> std::ops::Range<usize> {
        let o = self.partition.offsets();
        o[l]..o[l] + self.partition.sizes()[l]
    }

    fn weights<'a>(&self, theta: &'a [f64], k: usize) -> (&'a [f64], &'a [f64]) {
        (&theta[self.span(2 * k)], &theta[self.span(2 * k + 1)])
    }

    fn forward(&self, theta: &[f64], x: &[f64]) -> Tape {
        let depth = self.widths.len() - 1;
        let mut tape = Tape {
            z: Vec::with_capacity(depth),
            a: vec![x.to_vec()],
        };
        for k in 0..depth {
            let (w, b) = self.weights(theta, k);
            let input = &tape.a[k];
            let n_in = self.widths[k];
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, bo)| {
                    bo + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(input)
                        .map(|(p, q)| p * q)
                        .sum::<f64>()
                })
                .collect();
            let a = if k + 1 < depth {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            tape.z.push(z);
            tape.a.push(a);
        }
        tape
    }

    /// Cross-entropy of a logit vector and the predicted class.
    fn cross_entropy(logits: &[f64], label: usize) -> (f64, usize) {
        let (arg, max) =
            logits.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
        let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        (lse - logits[label], arg)
    }

    fn softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    fn rows<'a>(&self, batch: Option<&'a [usize]>, all: &'a mut Vec<usize>) -> &'a [usize] {
        match batch {
            Some(b) => b,
            None => {
                *all = (0..self.data.len()).collect();
                all
            }
        }
    }

    fn score(&self, theta: &[f64], data: &Dataset, rows: &[usize]) -> (f64, usize) {
        let mut total = 0.0;
        let mut correct = 0;
        for &i in rows {
            let tape = self.forward(theta, data.row(i));
            let label = data.label(i) as usize;
            let (ce, arg) = Self::cross_entropy(tape.a.last().unwrap(), label);
            total += ce;
            if arg == label {
                correct += 1;
            }
        }
        (total / rows.len() as f64, correct)
    }
}

impl Problem for Mlp {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn partition(&self) -> &LayerPartition {
        &self.partition
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn batch_loss(&self, theta: &[f64], batch: Option<&[usize]>) -> f64 {
        let mut all = Vec::new();
        let rows = self.rows(batch, &mut all);
        self.score(theta, &self.data, rows).0
    }

    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> GradientSnapshot {
        let mut all = Vec::new();
        let rows = self.rows(batch, &mut all);
        let depth = self.widths.len() - 1;
        let mut grad = vec![0.0; theta.len()];
        let scale = 1.0 / rows.len() as f64;
        for &i in rows {
            let tape = self.forward(theta, self.data.row(i));
            let mut delta = Self::softmax(tape.a.last().unwrap());
            delta[self.data.label(i) as usize] -= 1.0;
            for k in (0..depth).rev() {
                let n_in = self.widths[k];
                let input = &tape.a[k];
                let wr = self.span(2 * k);
                let br = self.span(2 * k + 1);
                for (o, d) in delta.iter().enumerate() {
                    let ds = d * scale;
                    grad[br.start + o] += ds;
                    for (j, x) in input.iter().enumerate() {
                        grad[wr.start + o * n_in + j] += ds * x;
                    }
                }
                if k > 0 {
                    let w = &theta[wr];
                    delta = (0..n_in)
                        .map(|j| {
                            let back: f64 = delta.iter().enumerate().map(|(o, d)| d * w[o * n_in + j]).sum();
                            back * self.activation.derivative(tape.z[k - 1][j], tape.a[k][j])
                        })
                        .collect();
                }
            }
        }
        GradientSnapshot::new(grad)
    }

    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        self.evaluate_on(theta, &self.data)
            .expect("training data matches layout")
    }

    fn evaluate_on(&self, theta: &[f64], data: &Dataset) -> Result<Evaluation> {
        if data.num_features() != self.widths[0] {
            return Err(Error::Dimension {
                expected: self.widths[0],
                actual: data.num_features(),
            });
        }
        let rows: Vec<usize> = (0..data.len()).collect();
        let (loss, correct) = self.score(theta, data, &rows);
        Ok(Evaluation {
            loss,
            accuracy: Some(correct as f64 / rows.len() as f64),
        })
    }

    fn is_convex(&self) -> bool {
        false
    }

    /// Glorot-uniform weights, zero biases.
    fn initial_params(&self, rng: &mut CounterRng) -> Vec<f64> {
        let mut theta = vec![0.0; self.partition.dim()];
        for (k, w) in self.widths.windows(2).enumerate() {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            for x in &mut theta[self.span(2 * k)] {
                *x = rng.uniform(-limit, limit);
            }
        }
        theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{epoch_batches, fd_gradient, make_two_moons, rel_err};

    fn moons() -> Dataset {
        make_two_moons(80, 0.1, 11).unwrap()
    }

    #[test]
    fn structure() {
        let net = Mlp::new(&[2, 8, 2], Activation::Tanh, moons()).unwrap();
        assert_eq!(net.partition().sizes(), &[16, 8, 16, 2]);
        let net = Mlp::new(&[2, 32, 32, 2], Activation::Tanh, moons()).unwrap();
        assert_eq!(net.partition().num_layers(), 6);
        assert_eq!(net.dim(), 64 + 32 + 1024 + 32 + 64 + 2);
    }

    #[test]
    fn width_mismatch_rejected() {
        assert!(Mlp::new(&[3, 8, 2], Activation::Tanh, moons()).is_err());
        assert!(Mlp::new(&[2], Activation::Tanh, moons()).is_err());
        assert!(Mlp::new(&[2, 1], Activation::Tanh, moons()).is_err());
        assert!(Mlp::new(&[2, 100, 100, 2], Activation::Tanh, moons()).is_err());
    }

    #[test]
    fn tanh_gradient_matches_central_differences() {
        let net = Mlp::new(&[2, 6, 5, 2], Activation::Tanh, moons()).unwrap();
        let mut rng = CounterRng::new(21);
        for _ in 0..10 {
            let th: Vec<f64> = (0..net.dim()).map(|_| rng.next_normal()).collect();
            let batch: Vec<usize> = (0..8).map(|_| rng.below(80)).collect();
            let fd = fd_gradient(&net, &th, Some(&batch), 1e-5);
            let g = net.gradient(&th, Some(&batch));
            assert!(rel_err(&g.values, &fd) < 1e-6);
        }
    }

    #[test]
    fn relu_gradient_away_from_kinks() {
        let net = Mlp::new(&[2, 7, 2], Activation::Relu, moons()).unwrap();
        let mut rng = CounterRng::new(8);
        let th: Vec<f64> = (0..net.dim()).map(|_| rng.next_normal()).collect();
        let fd = fd_gradient(&net, &th, None, 1e-6);
        assert!(rel_err(&net.gradient(&th, None).values, &fd) < 1e-5);
    }

    #[test]
    fn zero_weight_relu_net() {
        let net = Mlp::new(&[2, 4, 2], Activation::Relu, moons()).unwrap();
        let g = net.gradient(&vec![0.0; net.dim()], None).values;
        assert!(g[net.span(0)].iter().all(|&x| x == 0.0));
        assert!(g[net.span(1)].iter().all(|&x| x == 0.0));
        assert!(g[net.span(2)].iter().all(|&x| x == 0.0));
        // Output bias sees softmax(0) - onehot averaged over balanced classes.
        assert!(g[net.span(3)].iter().all(|x| x.is_finite() && x.abs() < 1e-15));
    }

    #[test]
    fn minibatch_average_equals_full_gradient() {
        let net = Mlp::new(&[2, 5, 2], Activation::Tanh, moons()).unwrap();
        let mut rng = CounterRng::new(2);
        let th = net.initial_params(&mut rng);
        let batches = epoch_batches(80, 16, &mut rng);
        let mut avg = vec![0.0; net.dim()];
        for b in &batches {
            for (a, g) in avg.iter_mut().zip(net.gradient(&th, Some(b)).values) {
                *a += g / batches.len() as f64;
            }
        }
        for (a, f) in avg.iter().zip(net.gradient(&th, None).values) {
            assert!((a - f).abs() <= 1e-10);
        }
    }

    #[test]
    fn glorot_init_bounds() {
        let net = Mlp::new(&[2, 32, 2], Activation::Tanh, moons()).unwrap();
        let th = net.initial_params(&mut CounterRng::new(1));
        let lim = (6.0f64 / 34.0).sqrt();
        assert!(th[net.span(0)].iter().all(|x| x.abs() <= lim));
        assert!(th[net.span(1)].iter().all(|&x| x == 0.0));
        let zero_loss = net.loss(&vec![0.0; net.dim()]);
        assert!((zero_loss - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
