//! Experiment configuration files and parameter validation.
//!
//! A config is a TOML file:
//!
//! ```toml
//! experiment = "boxcount-brownian-graph"
//! seed = 7
//! replicas = 1
//! output = "graph.json"   # optional
//!
//! [parameters]
//! d = 1
//! levels = 20
//! ```
//!
//! Parameters missing from the file take their schema defaults; the resolved
//! config is what gets recorded with the results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{find, Experiment};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<f64>),
}

impl Value {
    fn describe(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(x) => x.to_string(),
            Value::Text(s) => format!("{s:?}"),
            Value::List(v) => format!("{v:?}"),
        }
    }

    /// Parses a command-line override: integers, floats, booleans,
    /// comma-separated number lists, otherwise text.
    pub fn parse_cli(raw: &str) -> Value {
        let raw = raw.trim();
        if let Ok(i) = raw.parse::<i64>() {
            return Value::Int(i);
        }
        if let Ok(x) = raw.parse::<f64>() {
            return Value::Float(x);
        }
        if let Ok(b) = raw.parse::<bool>() {
            return Value::Bool(b);
        }
        if raw.contains(',') {
            let parts: Result<Vec<f64>, _> = raw.split(',').map(|p| p.trim().parse::<f64>()).collect();
            if let Ok(v) = parts {
                return Value::List(v);
            }
        }
        Value::Text(raw.to_string())
    }
}

/// Type and admissible range of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Kind {
    Int { min: i64, max: i64 },
    Float { min: f64, max: f64 },
    Bool,
    Choice { options: Vec<&'static str> },
    FloatList { min_len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(flatten)]
    pub kind: Kind,
    pub default: Value,
    pub help: &'static str,
}

impl ParamSpec {
    pub fn int(name: &'static str, min: i64, max: i64, default: i64, help: &'static str) -> Self {
        Self { name, kind: Kind::Int { min, max }, default: Value::Int(default), help }
    }

    pub fn float(name: &'static str, min: f64, max: f64, default: f64, help: &'static str) -> Self {
        Self { name, kind: Kind::Float { min, max }, default: Value::Float(default), help }
    }

    pub fn choice(name: &'static str, options: &[&'static str], default: &'static str, help: &'static str) -> Self {
        Self { name, kind: Kind::Choice { options: options.to_vec() }, default: Value::Text(default.into()), help }
    }

    pub fn list(name: &'static str, min_len: usize, default: &[f64], help: &'static str) -> Self {
        Self { name, kind: Kind::FloatList { min_len }, default: Value::List(default.to_vec()), help }
    }

    /// Checks `v` against the schema, returning the canonical value (ints
    /// widen to floats where a float is expected).
    pub fn check(&self, v: &Value) -> Result<Value, String> {
        let bad = |want: String| Err(format!("parameters.{}: expected {want}, got {}", self.name, v.describe()));
        match (&self.kind, v) {
            (Kind::Int { min, max }, Value::Int(i)) if i >= min && i <= max => Ok(v.clone()),
            (Kind::Int { min, max }, _) => bad(format!("an integer in [{min}, {max}]")),
            (Kind::Float { min, max }, Value::Int(i)) if (*i as f64) >= *min && (*i as f64) <= *max => {
                Ok(Value::Float(*i as f64))
            }
            (Kind::Float { min, max }, Value::Float(x)) if x >= min && x <= max => Ok(v.clone()),
            (Kind::Float { min, max }, _) => bad(format!("a number in [{min}, {max}]")),
            (Kind::Bool, Value::Bool(_)) => Ok(v.clone()),
            (Kind::Bool, _) => bad("true or false".into()),
            (Kind::Choice { options }, Value::Text(s)) if options.contains(&s.as_str()) => Ok(v.clone()),
            (Kind::Choice { options }, _) => bad(format!("one of {options:?}")),
            (Kind::FloatList { min_len }, Value::List(xs)) if xs.len() >= *min_len && xs.iter().all(|x| x.is_finite()) => {
                Ok(v.clone())
            }
            (Kind::FloatList { min_len }, Value::Int(i)) if *min_len <= 1 => Ok(Value::List(vec![*i as f64])),
            (Kind::FloatList { min_len }, Value::Float(x)) if *min_len <= 1 => Ok(Value::List(vec![*x])),
            (Kind::FloatList { min_len }, _) => bad(format!("a list of at least {min_len} finite numbers")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
}

fn one() -> u32 {
    1
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), seed: 0, replicas: 1, output: None, parameters: BTreeMap::new() }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs are plain TOML data")
    }

    /// Validates against the experiment's schema and fills in defaults.
    pub fn resolve(&self) -> Result<(ExperimentConfig, &'static Experiment), CliError> {
        let exp = find(&self.experiment)
            .ok_or_else(|| CliError::Validation(format!("experiment: unknown experiment {:?}", self.experiment)))?;
        if self.replicas == 0 {
            return Err(CliError::Validation("replicas: must be at least 1".into()));
        }
        let mut errors = Vec::new();
        for name in self.parameters.keys() {
            if !exp.params.iter().any(|p| p.name == name) {
                errors.push(format!("parameters.{name}: unknown parameter for {}", exp.name));
            }
        }
        let mut resolved = BTreeMap::new();
        for p in &exp.params {
            let v = self.parameters.get(p.name).unwrap_or(&p.default);
            match p.check(v) {
                Ok(v) => {
                    resolved.insert(p.name.to_string(), v);
                }
                Err(e) => errors.push(e),
            }
        }
        if !errors.is_empty() {
            return Err(CliError::Validation(errors.join("\n")));
        }
        Ok((ExperimentConfig { parameters: resolved, ..self.clone() }, exp))
    }
}

/// Resolved parameter values with typed accessors; only built from configs
/// that passed [`ExperimentConfig::resolve`].
pub struct Params<'a>(pub &'a BTreeMap<String, Value>);

impl Params<'_> {
    fn get(&self, name: &str) -> &Value {
        self.0.get(name).unwrap_or_else(|| panic!("parameter {name} missing from the schema"))
    }

    pub fn int(&self, name: &str) -> i64 {
        match self.get(name) {
            Value::Int(i) => *i,
            v => panic!("parameter {name} is not an integer: {v:?}"),
        }
    }

    pub fn usize(&self, name: &str) -> usize {
        self.int(name) as usize
    }

    pub fn float(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Float(x) => *x,
            Value::Int(i) => *i as f64,
            v => panic!("parameter {name} is not a number: {v:?}"),
        }
    }

    pub fn text(&self, name: &str) -> &str {
        match self.get(name) {
            Value::Text(s) => s,
            v => panic!("parameter {name} is not text: {v:?}"),
        }
    }

    pub fn list(&self, name: &str) -> &[f64] {
        match self.get(name) {
            Value::List(v) => v,
            v => panic!("parameter {name} is not a list: {v:?}"),
        }
    }
}
