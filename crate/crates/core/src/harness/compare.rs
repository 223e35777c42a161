use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::runner::{execute, write_ranges, write_summary, write_traces, RunSummary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FinalLoss,
    FinalAccuracy,
    ValLoss,
    ValAccuracy,
    /// Cross-layer coefficient of variation at the last recorded iteration.
    RangeCv,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::Config(format!("unknown metric `{s}`")))
    }

    pub fn extract(self, s: &RunSummary) -> Result<f64> {
        let value = match self {
            Metric::FinalLoss => Some(s.final_loss),
            Metric::FinalAccuracy => s.final_accuracy,
            Metric::ValLoss => s.final_val_loss,
            Metric::ValAccuracy => s.final_val_accuracy,
            Metric::RangeCv => s.final_range().map(|r| r.cv),
        };
        value.ok_or_else(|| Error::Config(format!("metric {self:?} is not available for this run")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub label: String,
    pub optimizer: String,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; `0` for a single seed.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: Metric,
    pub rows: Vec<CompareRow>,
    pub warnings: Vec<String>,
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut s = format!("{:<24} {:<24} {:>14} {:>14}\n", "label", "optimizer", "mean", "std");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<24} {:<24} {:>14.6e} {:>14.6e}",
                r.label, r.optimizer, r.mean, r.std
            );
        }
        s
    }
}

fn mean_sample_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run every `(label, config)` under every seed (in parallel) and tabulate
/// `metric`. All configs must share the problem and data description. When
/// `out_dir` is given, each run writes to `out_dir/<label>/seed-<seed>/`.
pub fn compare(
    configs: &[(String, RunConfig)],
    seeds: &[u64],
    metric: Metric,
    out_dir: Option<&Path>,
) -> Result<Comparison> {
    if configs.len() < 2 {
        return Err(Error::Config("compare needs at least two configs".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    let (_, first) = &configs[0];
    for (label, c) in &configs[1..] {
        if c.problem != first.problem || c.data != first.data {
            return Err(Error::Config(format!(
                "config `{label}` uses a different problem or dataset than `{}`",
                configs[0].0
            )));
        }
    }
    let mut warnings = Vec::new();
    if seeds.len() < 3 {
        warnings.push(format!(
            "only {} seed(s); at least 3 are recommended and std is reported as 0 for one seed",
            seeds.len()
        ));
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<Result<RunSummary>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (label, base) = &configs[i];
            let mut c = base.clone();
            c.run.seed = seed;
            let out = execute(&c)?;
            if let Some(dir) = out_dir {
                let dir = dir.join(label).join(format!("seed-{seed}"));
                std::fs::create_dir_all(&dir)?;
                write_traces(&dir, &out.traces)?;
                write_ranges(&dir, &out.ranges)?;
                write_summary(&dir, &out.summary)?;
            }
            Ok(out.summary)
        })
        .collect();
    let mut rows = Vec::with_capacity(configs.len());
    let mut results = results.into_iter();
    for (label, c) in configs {
        let values = results
            .by_ref()
            .take(seeds.len())
            .map(|r| r.and_then(|s| metric.extract(&s)))
            .collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_sample_std(&values);
        rows.push(CompareRow {
            label: label.clone(),
            optimizer: c.optimizer.kind.name().to_string(),
            seeds: seeds.to_vec(),
            values,
            mean,
            std,
        });
    }
    Ok(Comparison { metric, rows, warnings })
}
