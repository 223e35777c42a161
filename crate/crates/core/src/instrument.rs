//! Per-layer statistics of the adaptive stepsizes.
//!
//! Recorded stepsizes are unit-free (`1 / denom`, no `η_t`) unless the
//! recorder is built with [`Recorder::with_eta`]. Standard deviations are
//! population (biased) deviations over the coordinates of one layer at one
//! iteration.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rules::StepOutput;
use crate::state::LayerPartition;

/// Stepsize statistics of one layer at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsizeTrace {
    pub iter: u64,
    pub epoch: usize,
    pub layer: usize,
    pub mean_alpha: f64,
    pub std_alpha: f64,
    pub min_alpha: f64,
    pub max_alpha: f64,
    pub gamma: f64,
    pub angle_deg: f64,
}

/// Cross-layer spread of the layerwise mean stepsizes at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub iter: u64,
    pub epoch: usize,
    /// `max / min` of the layer means.
    pub ratio: f64,
    /// Coefficient of variation of the layer means.
    pub cv: f64,
    pub global_min_alpha: f64,
    pub global_max_alpha: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn layer_record(alpha: &[f64], iter: u64, epoch: usize, layer: usize, gamma: f64, cos2: f64) -> StepsizeTrace {
    let (mean, std) = mean_std(alpha);
    let (min, max) = alpha.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
        (lo.min(a), hi.max(a))
    });
    StepsizeTrace {
        iter,
        epoch,
        layer,
        // Rounding can push the mean a hair outside [min, max].
        mean_alpha: mean.clamp(min, max),
        std_alpha: std,
        min_alpha: min,
        max_alpha: max,
        gamma,
        angle_deg: cos2.clamp(0.0, 1.0).sqrt().acos().to_degrees(),
    }
}

/// One record per layer from a step's denominators (unit-free stepsizes).
pub fn record_layer_stats(out: &StepOutput, partition: &LayerPartition, epoch: usize) -> Result<Vec<StepsizeTrace>> {
    record_impl(out, partition, epoch, false)
}

/// Like [`record_layer_stats`] but with stepsizes multiplied by `η_t`.
pub fn record_layer_stats_with_eta(
    out: &StepOutput,
    partition: &LayerPartition,
    epoch: usize,
) -> Result<Vec<StepsizeTrace>> {
    record_impl(out, partition, epoch, true)
}

fn record_impl(
    out: &StepOutput,
    partition: &LayerPartition,
    epoch: usize,
    with_eta: bool,
) -> Result<Vec<StepsizeTrace>> {
    partition.check_len(out.denom.len())?;
    let scale = if with_eta { out.eta_t } else { 1.0 };
    let alpha: Vec<f64> = out.denom.iter().map(|d| scale / d).collect();
    Ok(partition
        .layers(&alpha)
        .enumerate()
        .map(|(l, a)| layer_record(a, out.t, epoch, l, out.gamma[l], out.cos2[l]))
        .collect())
}

/// Summarise the records of a single iteration. `None` when `traces` is empty.
pub fn summarize_range(traces: &[StepsizeTrace]) -> Option<RangeSummary> {
    let first = traces.first()?;
    debug_assert!(traces.iter().all(|r| r.iter == first.iter));
    let means: Vec<f64> = traces.iter().map(|r| r.mean_alpha).collect();
    let (mu, sd) = mean_std(&means);
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(RangeSummary {
        iter: first.iter,
        epoch: first.epoch,
        ratio: (hi / lo).max(1.0),
        cv: sd / mu,
        global_min_alpha: traces.iter().map(|r| r.min_alpha).fold(f64::INFINITY, f64::min),
        global_max_alpha: traces.iter().map(|r| r.max_alpha).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Anything stamped with an iteration number.
pub trait Stamped {
    fn iteration(&self) -> u64;
}

impl Stamped for StepsizeTrace {
    fn iteration(&self) -> u64 {
        self.iter
    }
}

impl Stamped for RangeSummary {
    fn iteration(&self) -> u64 {
        self.iter
    }
}

/// Keep every `every_k`-th recorded iteration (counting recorded iterations
/// from 0) plus the final one. All records of a kept iteration are kept.
pub fn downsample<T: Stamped + Clone>(records: &[T], every_k: usize) -> Vec<T> {
    let every_k = every_k.max(1);
    let Some(last_iter) = records.last().map(Stamped::iteration) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut ordinal = 0usize;
    let mut current = None;
    for r in records {
        let it = r.iteration();
        if current.is_some() && current != Some(it) {
            ordinal += 1;
        }
        current = Some(it);
        if ordinal.is_multiple_of(every_k) || it == last_iter {
            out.push(r.clone());
        }
    }
    out
}

/// Append-only collector used by the training loop.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    with_eta: bool,
    pub traces: Vec<StepsizeTrace>,
    pub ranges: Vec<RangeSummary>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_eta() -> Self {
        Self {
            with_eta: true,
            ..Self::default()
        }
    }

    pub fn observe(&mut self, out: &StepOutput, partition: &LayerPartition, epoch: usize) -> Result<()> {
        let recs = record_impl(out, partition, epoch, self.with_eta)?;
        if let Some(summary) = summarize_range(&recs) {
            self.ranges.push(summary);
        }
        self.traces.extend(recs);
        Ok(())
    }

    /// Records of the most recent observed iteration.
    pub fn last_iteration(&self) -> &[StepsizeTrace] {
        let Some(last) = self.traces.last() else {
            return &[];
        };
        let start = self
            .traces
            .iter()
            .rposition(|r| r.iter != last.iter)
            .map_or(0, |p| p + 1);
        &self.traces[start..]
    }
}
