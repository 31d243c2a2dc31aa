//! Experiment documents and key overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use wrdescent::engine::RecordLevel;
use wrdescent::oracles::ProblemKind;
use wrdescent::schedules::{EvalPointPolicy, PermutationPolicy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

/// Step rule as written in a config. Rules that need `L` take it from the
/// problem unless given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyFields {
    Constant { alpha: f64 },
    /// `alpha = scale / L`
    ConstantOverL { scale: f64 },
    Sqrt,
    Cbrt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l: Option<f64>,
    },
    /// Defaults `delta = n^3`, `beta = n^2`.
    Adaptive {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
}

/// Accepts either the full object or a bare rule name such as `"sqrt"`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StrategySpec(pub StrategyFields);

impl<'de> Deserialize<'de> for StrategySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        let value = match value {
            Value::String(rule) => serde_json::json!({ "rule": rule }),
            other => other,
        };
        StrategyFields::deserialize(value).map(StrategySpec).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    #[default]
    Zero,
    /// Uniform draw from the ball of `radius` around the origin.
    Ball { radius: f64, seed: u64 },
    Point { value: Vec<f64> },
}

fn default_eval() -> EvalPointPolicy {
    EvalPointPolicy::Incremental
}

fn default_permutation() -> PermutationPolicy {
    PermutationPolicy::Identity
}

fn default_record_level() -> RecordLevel {
    RecordLevel::Full
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub strategy: StrategySpec,
    #[serde(default = "default_eval")]
    pub eval_policy: EvalPointPolicy,
    #[serde(default = "default_permutation")]
    pub permutation: PermutationPolicy,
    #[serde(default)]
    pub x0: StartSpec,
    pub epochs: usize,
    #[serde(default = "default_record_level")]
    pub record_level: RecordLevel,
    #[serde(default)]
    pub monitor_radius: Option<f64>,
    /// Checks run after the run completes; names as accepted by `verify`.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        let config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            anyhow!("invalid config at `{path}`: {}", e.into_inner())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            bail!("invalid config at `epochs`: need at least one epoch, got 0");
        }
        if self.problem.n == 0 || self.problem.p == 0 {
            bail!("invalid config at `problem`: n and p must be at least 1");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Value text as JSON when it parses, otherwise as a string.
pub fn parse_scalar(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Sets `dotted.key` in a JSON document, creating objects along the way.
pub fn set_key(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut node = doc;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            bail!("empty segment in key `{key}`");
        }
        if !node.is_object() {
            bail!("cannot set `{key}`: `{part}` is inside a non-object value");
        }
        let map = node.as_object_mut().expect("checked object");
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}

/// Parses `key=value`.
pub fn parse_assignment(text: &str) -> Result<(String, Value)> {
    let (key, value) = text.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{text}`"))?;
    Ok((key.trim().to_string(), parse_scalar(value.trim())))
}
