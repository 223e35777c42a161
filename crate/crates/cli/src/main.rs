use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use setadam::harness::{self, Metric, RunConfig};
use setadam::hyper::HyperParams;
use setadam::problems::{QuadraticProblem, SpdMatrix};
use setadam::rng::CounterRng;
use setadam::theory::{self, Verdict};

#[derive(Parser)]
#[command(name = "setadam", version, about = "Run and verify adaptive optimizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one config and write trace.csv, range.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        trace_every: Option<u64>,
    },
    /// Run several configs over a seed set and tabulate a metric.
    Compare {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "final-accuracy")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verifier and print its JSON report.
    #[command(subcommand)]
    Verify(Verify),
}

#[derive(Subcommand)]
enum Verify {
    /// Averaged-iterate gap against the regret bound on a seeded quadratic.
    Regret(TheoremArgs),
    /// Weighted momentum sum against its bound on a seeded quadratic.
    Lemma1(TheoremArgs),
    /// First-order form of the epsilon-inside stepsize on a random vector.
    Taylor {
        /// Comma-separated second-moment vector; random when omitted.
        #[arg(long, value_delimiter = ',')]
        v: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        t: u64,
        #[arg(long, default_value_t = 0.999)]
        beta2: f64,
        #[arg(long, default_value_t = 1e-8)]
        epsilon: f64,
    },
    /// Original and reformulated AdaBelief trajectories.
    AdabeliefIdentity {
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 20)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// SET-Adam with unit scaling and no translation against Adam*.
    Equivalence {
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct TheoremArgs {
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 2.0)]
    radius: f64,
}

/// Exit 1: a verifier or invariant check failed.
const FAILED: u8 = 1;
/// Exit 2: bad config, options or I/O.
const CONFIG_ERROR: u8 = 2;

type Outcome = Result<bool, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            trace_every,
        } => run(&config, seed, &out, trace_every),
        Command::Compare {
            configs,
            seeds,
            metric,
            out,
        } => compare(&configs, &seeds, &metric, out.as_deref()),
        Command::Verify(v) => verify(v),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, String> {
    RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(config: &Path, seed: Option<u64>, out: &Path, trace_every: Option<u64>) -> Outcome {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if trace_every.is_some() {
        cfg.run.trace_every = trace_every;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let summary = harness::run(&cfg, out).map_err(|e| e.to_string())?;
    let inv = &summary.invariants;
    println!(
        "{} on {}: {} iterations, loss {:.6} -> {:.6}{}",
        summary.optimizer,
        summary.problem,
        summary.iterations,
        summary.initial_loss,
        summary.final_loss,
        summary
            .final_accuracy
            .map(|a| format!(", accuracy {a:.4}"))
            .unwrap_or_default()
    );
    println!("wrote {}", out.join(harness::SUMMARY_FILE).display());
    let ok = inv.lower_bound_violations == 0 && inv.upper_bound_violations == 0;
    if !ok {
        eprintln!(
            "stepsize bound violations: {} lower, {} upper",
            inv.lower_bound_violations, inv.upper_bound_violations
        );
    }
    Ok(ok)
}

fn compare(paths: &[PathBuf], seeds: &[u64], metric: &str, out: Option<&Path>) -> Outcome {
    let metric = Metric::parse(metric).map_err(|e| e.to_string())?;
    let mut configs = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let stem = p
            .file_stem()
            .map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned());
        let label = if paths.iter().filter(|q| q.file_stem() == p.file_stem()).count() > 1 {
            format!("{stem}-{i}")
        } else {
            stem
        };
        configs.push((label, load(p)?));
    }
    let cmp = harness::compare(&configs, seeds, metric, out).map_err(|e| e.to_string())?;
    for w in &cmp.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", cmp.table());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        let path = dir.join("comparison.json");
        let json = serde_json::to_string_pretty(&cmp).map_err(|e| e.to_string())?;
        std::fs::write(&path, json + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(true)
}

fn emit<T: Serialize>(report: &T, verdict: Verdict) -> Outcome {
    let json = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    let _ = writeln!(std::io::stdout().lock(), "{json}");
    if verdict == Verdict::Vacuous {
        eprintln!("vacuous: theorem assumptions do not hold on this run");
    }
    Ok(!verdict.is_failure())
}

/// Diagonal quadratic with curvatures in [0.5, 1.5] and optimum in
/// [-0.5, 0.5]; each start coordinate sits 0.5 to 1 away from the optimum.
fn seeded_quadratic(dim: usize, seed: u64) -> Result<(QuadraticProblem, Vec<f64>), String> {
    if dim == 0 {
        return Err("--dim must be positive".into());
    }
    let mut rng = CounterRng::new(seed);
    let a: Vec<f64> = (0..dim).map(|_| rng.uniform(0.5, 1.5)).collect();
    let star: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.5, 0.5)).collect();
    let b: Vec<f64> = a.iter().zip(&star).map(|(ai, s)| ai * s).collect();
    let theta0: Vec<f64> = star
        .iter()
        .map(|s| {
            let offset = rng.uniform(0.5, 1.0);
            if rng.next_f64() < 0.5 {
                s - offset
            } else {
                s + offset
            }
        })
        .collect();
    let problem = QuadraticProblem::new(SpdMatrix::Diagonal(a), b)
        .and_then(|p| p.with_partition(&vec![1; dim]))
        .map_err(|e| e.to_string())?;
    Ok((problem, theta0))
}

fn theorem_instance(a: &TheoremArgs) -> Result<theory::TheoremInstance, String> {
    if a.lambda.is_nan() || a.lambda >= 1.0 {
        return Err(format!(
            "--lambda must be < 1: the bound divides by (1 - lambda)^2, got lambda = {}",
            a.lambda
        ));
    }
    let hp = theory::theoretical_hyperparams(a.eta, a.beta1, a.beta2, a.lambda, a.epsilon, a.tau);
    let (problem, theta0) = seeded_quadratic(a.dim, a.seed)?;
    theory::run_theorem_instance(&problem, &hp, a.horizon, a.radius, &theta0).map_err(|e| e.to_string())
}

fn verify(v: Verify) -> Outcome {
    match v {
        Verify::Regret(a) => {
            let inst = theorem_instance(&a)?;
            let r = theory::verify_regret(&inst).map_err(|e| e.to_string())?;
            emit(&r, r.verdict)
        }
        Verify::Lemma1(a) => {
            let inst = theorem_instance(&a)?;
            let assumptions = theory::check_assumptions(&inst);
            let r = theory::verify_lemma1(&inst, &assumptions);
            emit(&r, r.verdict)
        }
        Verify::Taylor {
            v,
            dim,
            seed,
            t,
            beta2,
            epsilon,
        } => {
            let v = if v.is_empty() {
                let mut rng = CounterRng::new(seed);
                (0..dim).map(|_| 10f64.powf(rng.uniform(-6.0, 0.0))).collect()
            } else {
                v
            };
            let r = theory::verify_taylor_suppression(&v, t, beta2, epsilon).map_err(|e| e.to_string())?;
            let verdict = Verdict::from_bool(r.passed);
            emit(&r, verdict)
        }
        Verify::AdabeliefIdentity { steps, dim, seed } => {
            let hp = HyperParams {
                epsilon: 1e-8,
                ..Default::default()
            };
            let r = theory::verify_adabelief_identity(steps, dim, seed, &hp).map_err(|e| e.to_string())?;
            emit(&r, r.verdict)
        }
        Verify::Equivalence { steps, dim, seed } => {
            let r = theory::verify_equivalence(steps, dim, seed).map_err(|e| e.to_string())?;
            emit(&r, r.verdict)
        }
    }
}
