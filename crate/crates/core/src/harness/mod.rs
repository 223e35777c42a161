//! Config-driven experiment runner: training loop with stepsize
//! instrumentation, CSV/JSON artifacts and multi-seed comparisons.

mod compare;
mod config;
mod runner;

pub use compare::{compare, CompareRow, Comparison, Metric};
pub use config::{
    apply_overrides, DataConfig, DataSource, Mode, OptimizerConfig, Precision, ProblemConfig, RunConfig, RunSettings,
    ENV_PREFIX,
};
pub use runner::{
    build_problem, execute, run, write_ranges, write_summary, write_traces, BuiltProblem, InvariantCounts, RunOutput,
    RunSummary, RANGE_FILE, SUMMARY_FILE, TRACE_FILE,
};
