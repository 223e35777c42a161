//! Flat, layer-partitioned parameter and momentum storage.
//!
//! Parameters live in one contiguous `Vec<f64>`; a [`LayerPartition`] slices
//! it into per-layer segments. A "layer" is one parameter tensor, so a weight
//! matrix and its bias vector are two separate entries. Layer indices are
//! 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous slicing of a flat vector into `L` non-empty segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LayerPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl LayerPartition {
    pub fn new(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.is_empty() {
            return Err(Error::InvalidPartition("no layers given".into()));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("layer {pos} has size 0")));
        }
        let mut offsets = Vec::with_capacity(layer_sizes.len());
        let mut acc = 0usize;
        for &s in layer_sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self {
            sizes: layer_sizes.to_vec(),
            offsets,
            dim: acc,
        })
    }

    /// One layer covering `dim` coordinates.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(&[dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Coordinate range of layer `l`.
    pub fn range(&self, l: usize) -> Result<std::ops::Range<usize>> {
        if l >= self.sizes.len() {
            return Err(Error::LayerIndex {
                index: l,
                layers: self.sizes.len(),
            });
        }
        Ok(self.offsets[l]..self.offsets[l] + self.sizes[l])
    }

    pub fn layer<'a>(&self, values: &'a [f64], l: usize) -> Result<&'a [f64]> {
        self.check_len(values.len())?;
        Ok(&values[self.range(l)?])
    }

    pub fn layer_mut<'a>(&self, values: &'a mut [f64], l: usize) -> Result<&'a mut [f64]> {
        self.check_len(values.len())?;
        let r = self.range(l)?;
        Ok(&mut values[r])
    }

    /// Iterate over all layer segments in order.
    pub fn layers<'a>(&'a self, values: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
        debug_assert_eq!(values.len(), self.dim);
        self.offsets
            .iter()
            .zip(&self.sizes)
            .map(move |(&o, &s)| &values[o..o + s])
    }

    /// Disjoint mutable views of every layer.
    pub fn layers_mut<'a>(&self, mut values: &'a mut [f64]) -> Vec<&'a mut [f64]> {
        debug_assert_eq!(values.len(), self.dim);
        let mut out = Vec::with_capacity(self.sizes.len());
        for &s in &self.sizes {
            let (head, tail) = values.split_at_mut(s);
            out.push(head);
            values = tail;
        }
        out
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: len,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for LayerPartition {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(&sizes)
    }
}

impl From<LayerPartition> for Vec<usize> {
    fn from(p: LayerPartition) -> Self {
        p.sizes
    }
}

/// Model parameters `θ` with their partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f64>,
    partition: LayerPartition,
}

impl ModelParams {
    pub fn new(values: Vec<f64>, partition: LayerPartition) -> Result<Self> {
        partition.check_len(values.len())?;
        check_finite(&values, "parameters")?;
        Ok(Self { values, partition })
    }

    pub fn zeros(partition: LayerPartition) -> Self {
        Self {
            values: vec![0.0; partition.dim()],
            partition,
        }
    }

    pub fn partition(&self) -> &LayerPartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn layer(&self, l: usize) -> Result<&[f64]> {
        self.partition.layer(&self.values, l)
    }

    pub fn layer_mut(&mut self, l: usize) -> Result<&mut [f64]> {
        self.partition.layer_mut(&mut self.values, l)
    }
}

/// Gradient `g_t` at the current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSnapshot {
    pub values: Vec<f64>,
}

impl GradientSnapshot {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl From<Vec<f64>> for GradientSnapshot {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// Per-layer transient buffers used by SET-Adam (flat, same layout as `θ`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scratch {
    /// Down-scaled second momentum.
    pub scaled: Vec<f64>,
    /// Denominator after ε-embedding.
    pub embedded: Vec<f64>,
    /// Denominator after down-translating.
    pub translated: Vec<f64>,
}

/// First/second momentum buffers and the iteration counter.
///
/// `second` holds `v` for the Adam family and `s` for AdaBelief.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub t: u64,
    pub scratch: Scratch,
}

impl MomentState {
    pub fn new(dim: usize) -> Self {
        Self {
            first: vec![0.0; dim],
            second: vec![0.0; dim],
            t: 0,
            scratch: Scratch::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Round momenta to single precision (storage emulation for f32 runs).
    pub fn round_to_f32(&mut self) {
        round_f32(&mut self.first);
        round_f32(&mut self.second);
    }
}

pub(crate) fn round_f32(values: &mut [f64]) {
    for x in values {
        *x = *x as f32 as f64;
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
