use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::problems::Activation;
use crate::rules::OptimizerKind;

/// Prefix of environment variables that override config keys, e.g.
/// `SETADAM__RUN__EPOCHS=5` or `SETADAM__OPTIMIZER__EPSILON=1e-6`.
pub const ENV_PREFIX: &str = "SETADAM__";

/// A complete, re-runnable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub data: DataConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub run: RunSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `½ θᵀAθ - bᵀθ`; give exactly one of `diagonal` or `dense`.
    Quadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagonal: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dense: Option<Vec<Vec<f64>>>,
        b: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partition: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<Vec<f64>>,
    },
    Logistic {
        #[serde(default)]
        l2: f64,
    },
    Mlp {
        widths: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl ProblemConfig {
    pub fn needs_data(&self) -> bool {
        !matches!(self, ProblemConfig::Quadratic { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    TwoMoons,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Two-moons sample count.
    pub n: usize,
    /// Two-moons noise standard deviation.
    pub noise: f64,
    /// Dataset seed; the run seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub label_column: String,
    /// Share of rows held out for validation.
    pub validation_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::TwoMoons,
            n: 500,
            noise: 0.1,
            seed: None,
            path: None,
            label_column: "label".into(),
            validation_fraction: 0.0,
        }
    }
}

/// Optimizer kind plus its hyperparameters, written flat in one section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOptimizer")]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(flatten)]
    pub hyper: HyperParams,
}

#[derive(Deserialize)]
struct RawOptimizer {
    kind: OptimizerKind,
    #[serde(flatten)]
    rest: BTreeMap<String, serde_json::Value>,
}

impl TryFrom<RawOptimizer> for OptimizerConfig {
    type Error = String;

    fn try_from(raw: RawOptimizer) -> std::result::Result<Self, String> {
        let map: serde_json::Map<String, serde_json::Value> = raw.rest.into_iter().collect();
        let hyper = HyperParams::deserialize(serde_json::Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(Self { kind: raw.kind, hyper })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Train,
    /// `η/√t` schedule, no first-moment bias correction, projection onto the
    /// problem's radius. Convex problems only.
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    /// Parameters and momenta are rounded to `f32` after every step.
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Record stepsize statistics every `K` iterations (plus the final one).
    /// When absent, the last iteration of each epoch is recorded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_every: Option<u64>,
    /// Full-gradient steps per epoch for problems without data.
    pub steps_per_epoch: usize,
    pub mode: Mode,
    pub precision: Precision,
    /// Multiply recorded stepsizes by `η_t`.
    pub trace_includes_eta: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            seed: 0,
            trace_every: None,
            steps_per_epoch: 1,
            mode: Mode::Train,
            precision: Precision::F64,
            trace_includes_eta: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse TOML and apply `SETADAM__SECTION__KEY=value` overrides.
    pub fn from_toml_with_overrides<I, K, V>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_overrides(&mut table, vars)?;
        Self::from_table(table)
    }

    /// Load a config file. `.json` files are accepted too, either a bare
    /// config or a run summary whose `config` echo is reused. Environment
    /// overrides apply to TOML files.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if let Some(echo) = value.get_mut("config") {
                value = echo.take();
            }
            let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
            cfg.validate()?;
            return Ok(cfg);
        }
        Self::from_toml_with_overrides(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer
            .hyper
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.run.batch_size == 0 {
            return Err(Error::Config("run.batch_size must be positive".into()));
        }
        if self.run.steps_per_epoch == 0 {
            return Err(Error::Config("run.steps_per_epoch must be positive".into()));
        }
        if self.run.trace_every == Some(0) {
            return Err(Error::Config("run.trace_every must be positive".into()));
        }
        if self.data.source == DataSource::Csv && self.problem.needs_data() && self.data.path.is_none() {
            return Err(Error::Config("data.path is required for csv data".into()));
        }
        if self.run.mode == Mode::Theoretical && matches!(self.problem, ProblemConfig::Mlp { .. }) {
            return Err(Error::Config(
                "theoretical mode needs a convex problem; mlp is nonconvex".into(),
            ));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply `SETADAM__A__B=value` pairs as `a.b = value`. Values are parsed as
/// TOML literals, falling back to plain strings. Other variables are ignored.
pub fn apply_overrides<I, K, V>(table: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    for (key, value) in vars {
        let Some(path) = key.as_ref().strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let parts: Vec<String> = path.split("__").map(str::to_lowercase).collect();
        if parts.iter().any(String::is_empty) {
            return Err(Error::Config(format!("malformed override variable {}", key.as_ref())));
        }
        let (leaf, sections) = parts.split_last().expect("split yields at least one part");
        let mut node = &mut *table;
        for s in sections {
            let entry = node
                .entry(s.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override {} crosses non-table key `{s}`", key.as_ref())))?;
        }
        node.insert(leaf.clone(), parse_value(value.as_ref()));
    }
    Ok(())
}
