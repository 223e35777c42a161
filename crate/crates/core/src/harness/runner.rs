use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DataSource, Mode, Precision, ProblemConfig, RunConfig};
use crate::error::{Error, Result};
use crate::hyper::{HyperParams, Schedule};
use crate::instrument::{RangeSummary, Recorder, StepsizeTrace};
use crate::problems::{
    epoch_batches, load_csv_dataset, make_two_moons, project_to_ball, Dataset, LogisticRegression, Mlp, Problem,
    QuadraticProblem, SpdMatrix,
};
use crate::rng::CounterRng;
use crate::rules::{Optimizer, OptimizerKind, StepOutput};
use crate::state::ModelParams;

pub const TRACE_FILE: &str = "trace.csv";
pub const RANGE_FILE: &str = "range.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const TRACE_HEADER: [&str; 9] = [
    "iter",
    "epoch",
    "layer",
    "mean_alpha",
    "std_alpha",
    "min_alpha",
    "max_alpha",
    "gamma",
    "angle_deg",
];
const RANGE_HEADER: [&str; 6] = ["iter", "epoch", "ratio", "cv", "global_min_alpha", "global_max_alpha"];

const STREAM_INIT: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_BATCHES: u64 = 1_000;

/// Steps that broke a known stepsize bound. Only rules with a closed-form
/// bound are checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantCounts {
    pub checked_steps: u64,
    /// SET-Adam steps with `min w̃ < (1-τ)√ε`.
    pub lower_bound_violations: u64,
    /// Steps with some `1/denom` above the rule's cap.
    pub upper_bound_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub config: RunConfig,
    pub problem: String,
    pub optimizer: String,
    pub dim: usize,
    pub layers: usize,
    pub iterations: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_val_accuracy: Option<f64>,
    /// Training loss before the first step and after every epoch.
    pub loss_curve: Vec<f64>,
    /// Validation loss after every epoch (empty without a validation split).
    pub val_loss_curve: Vec<f64>,
    pub range_series: Vec<RangeSummary>,
    /// Per-layer records of the last recorded iteration.
    pub final_layer_stats: Vec<StepsizeTrace>,
    pub invariants: InvariantCounts,
    pub single_class_data: bool,
    pub wall_time_secs: f64,
    pub trace_file: String,
    pub range_file: String,
}

impl RunSummary {
    pub fn final_range(&self) -> Option<&RangeSummary> {
        self.range_series.last()
    }
}

/// In-memory result of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub traces: Vec<StepsizeTrace>,
    pub ranges: Vec<RangeSummary>,
}

pub struct BuiltProblem {
    pub problem: Box<dyn Problem>,
    pub validation: Option<Dataset>,
    pub single_class: bool,
}

fn load_data(config: &RunConfig) -> Result<Dataset> {
    let d = &config.data;
    match d.source {
        DataSource::TwoMoons => make_two_moons(d.n, d.noise, d.seed.unwrap_or(config.run.seed)),
        DataSource::Csv => {
            let path = d
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("data.path is required for csv data".into()))?;
            load_csv_dataset(path, &d.label_column)
        }
    }
}

/// Construct the problem and the optional validation split.
pub fn build_problem(config: &RunConfig) -> Result<BuiltProblem> {
    if let ProblemConfig::Quadratic {
        diagonal,
        dense,
        b,
        partition,
        radius,
        theta0,
    } = &config.problem
    {
        let a = match (diagonal, dense) {
            (Some(d), None) => SpdMatrix::Diagonal(d.clone()),
            (None, Some(m)) => SpdMatrix::Dense(m.clone()),
            _ => {
                return Err(Error::Config(
                    "quadratic needs exactly one of `diagonal` or `dense`".into(),
                ))
            }
        };
        let mut q = QuadraticProblem::new(a, b.clone())?;
        if let Some(p) = partition {
            q = q.with_partition(p)?;
        }
        if let Some(r) = radius {
            q = q.with_radius(*r)?;
        }
        if let Some(t) = theta0 {
            q = q.with_initial(t.clone())?;
        }
        return Ok(BuiltProblem {
            problem: Box::new(q),
            validation: None,
            single_class: false,
        });
    }
    let data = load_data(config)?;
    let split_seed = CounterRng::new(config.run.seed).stream(STREAM_SPLIT).next_u64();
    let (train, validation) = data.split(config.data.validation_fraction, split_seed)?;
    let single_class = train.is_single_class();
    let problem: Box<dyn Problem> = match &config.problem {
        ProblemConfig::Logistic { l2 } => Box::new(LogisticRegression::new(train, *l2)?),
        ProblemConfig::Mlp { widths, activation } => Box::new(Mlp::new(widths, *activation, train)?),
        ProblemConfig::Quadratic { .. } => unreachable!(),
    };
    Ok(BuiltProblem {
        problem,
        validation,
        single_class,
    })
}

fn effective_hyper(config: &RunConfig) -> HyperParams {
    let mut hp = config.optimizer.hyper.clone();
    if config.run.mode == Mode::Theoretical {
        hp.schedule = Schedule::InverseSqrt;
        hp.first_moment_bias_correction = false;
    }
    hp
}

/// Closed-form caps: `(lower bound on min denom, upper bound on 1/denom)`.
fn stepsize_bounds(kind: OptimizerKind, hp: &HyperParams) -> (Option<f64>, Option<f64>) {
    let slack = 1.0 - 4.0 * f64::EPSILON;
    match kind {
        OptimizerKind::SetAdam => {
            let floor = (1.0 - hp.tau) * hp.epsilon.sqrt();
            (Some(floor * slack), Some(1.0 / (floor * slack)))
        }
        OptimizerKind::Adam => (None, Some(1.0 / (hp.epsilon * slack))),
        OptimizerKind::AdamStar => (None, Some(1.0 / (hp.epsilon.sqrt() * slack))),
        _ => (None, None),
    }
}

fn check_bounds(out: &StepOutput, bounds: (Option<f64>, Option<f64>), counts: &mut InvariantCounts) {
    if bounds.0.is_none() && bounds.1.is_none() {
        return;
    }
    counts.checked_steps += 1;
    let min_denom = out.denom.iter().copied().fold(f64::INFINITY, f64::min);
    if bounds.0.is_some_and(|lo| min_denom < lo) {
        counts.lower_bound_violations += 1;
    }
    if bounds.1.is_some_and(|hi| 1.0 / min_denom > hi) {
        counts.upper_bound_violations += 1;
    }
}

/// Run the experiment in memory.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let built = build_problem(config)?;
    let problem = built.problem.as_ref();
    if config.run.mode == Mode::Theoretical && !problem.is_convex() {
        return Err(Error::Config(format!(
            "theoretical mode needs a convex problem; {} is nonconvex",
            problem.name()
        )));
    }
    let hp = effective_hyper(config);
    let kind = config.optimizer.kind;
    let root = CounterRng::new(config.run.seed);
    let partition = problem.partition().clone();
    let mut params = ModelParams::new(problem.initial_params(&mut root.stream(STREAM_INIT)), partition.clone())?;
    let radius = match config.run.mode {
        Mode::Theoretical => problem.projection_radius(),
        Mode::Train => None,
    };
    if let Some(r) = radius {
        project_to_ball(&mut params.values, r);
    }
    let mut opt = Optimizer::new(kind, hp.clone(), params.dim())?;
    let mut recorder = if config.run.trace_includes_eta {
        Recorder::with_eta()
    } else {
        Recorder::new()
    };
    let bounds = stepsize_bounds(kind, &hp);
    let mut counts = InvariantCounts::default();
    let f32_mode = config.run.precision == Precision::F32;

    let evaluate_val = |theta: &[f64]| -> Result<Option<f64>> {
        built
            .validation
            .as_ref()
            .map(|v| problem.evaluate_on(theta, v).map(|e| e.loss))
            .transpose()
    };
    let mut loss_curve = vec![problem.loss(&params.values)];
    let mut val_loss_curve = Vec::new();
    let n = problem.num_samples();
    let mut t: u64 = 0;
    for epoch in 0..config.run.epochs {
        let batches: Vec<Option<Vec<usize>>> = if n == 0 {
            vec![None; config.run.steps_per_epoch]
        } else {
            let mut rng = root.stream(STREAM_BATCHES + epoch as u64);
            epoch_batches(n, config.run.batch_size, &mut rng)
                .into_iter()
                .map(Some)
                .collect()
        };
        let last = batches.len() - 1;
        for (b, batch) in batches.iter().enumerate() {
            let g = problem.gradient(&params.values, batch.as_deref());
            let out = opt.step(&mut params, &g, epoch)?;
            t = out.t;
            if f32_mode {
                opt.state.round_to_f32();
                for x in &mut params.values {
                    *x = *x as f32 as f64;
                }
            }
            if let Some(r) = radius {
                project_to_ball(&mut params.values, r);
            }
            check_bounds(&out, bounds, &mut counts);
            let record = match config.run.trace_every {
                Some(k) => t.is_multiple_of(k) || (epoch + 1 == config.run.epochs && b == last),
                None => b == last,
            };
            if record {
                recorder.observe(&out, &partition, epoch)?;
            }
        }
        loss_curve.push(problem.loss(&params.values));
        if let Some(v) = evaluate_val(&params.values)? {
            val_loss_curve.push(v);
        }
    }

    let train_eval = problem.evaluate(&params.values);
    let val_eval = built
        .validation
        .as_ref()
        .map(|v| problem.evaluate_on(&params.values, v))
        .transpose()?;
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        problem: problem.name().to_string(),
        optimizer: kind.name().to_string(),
        dim: params.dim(),
        layers: partition.num_layers(),
        iterations: t,
        initial_loss: loss_curve[0],
        final_loss: train_eval.loss,
        final_accuracy: train_eval.accuracy,
        final_val_loss: val_eval.map(|e| e.loss),
        final_val_accuracy: val_eval.and_then(|e| e.accuracy),
        loss_curve,
        val_loss_curve,
        range_series: recorder.ranges.clone(),
        final_layer_stats: recorder.last_iteration().to_vec(),
        invariants: counts,
        single_class_data: built.single_class,
        wall_time_secs: started.elapsed().as_secs_f64(),
        trace_file: TRACE_FILE.into(),
        range_file: RANGE_FILE.into(),
    };
    Ok(RunOutput {
        summary,
        traces: recorder.traces,
        ranges: recorder.ranges,
    })
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces(dir: &Path, traces: &[StepsizeTrace]) -> Result<()> {
    write_csv(&dir.join(TRACE_FILE), &TRACE_HEADER, traces)
}

pub fn write_ranges(dir: &Path, ranges: &[RangeSummary]) -> Result<()> {
    write_csv(&dir.join(RANGE_FILE), &RANGE_HEADER, ranges)
}

pub fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let mut f = File::create(dir.join(SUMMARY_FILE))?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Run the experiment and write `trace.csv`, `range.csv` and `summary.json`
/// into `out_dir` (created if missing). Traces are written before the summary.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let output = execute(config)?;
    std::fs::create_dir_all(out_dir)?;
    write_traces(out_dir, &output.traces)?;
    write_ranges(out_dir, &output.ranges)?;
    write_summary(out_dir, &output.summary)?;
    Ok(output.summary)
}
