//! Run configuration: flat `key=value` files overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dre_core::{Coupling, FieldSpec};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{key}`{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize> },
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("`{0}` and `{1}` cannot both be set")]
    Conflict(&'static str, &'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Convergence,
    OracleCheck,
    TransformCheck,
}

impl Command {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solve" => Command::Solve,
            "convergence" => Command::Convergence,
            "oracle-check" => Command::OracleCheck,
            "transform-check" => Command::TransformCheck,
            _ => return None,
        })
    }
}

pub const KEYS: &[&str] = &[
    "command", "nx", "nx-ladder", "nt", "nt-ladder", "T", "lambda", "xi", "zeta", "coupling", "out", "ref-nx",
    "ref-nt",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub nx_ladder: Vec<usize>,
    pub nt_ladder: Vec<usize>,
    pub horizon: f64,
    pub lambda: f64,
    pub xi: FieldSpec,
    pub zeta: FieldSpec,
    pub coupling: Coupling,
    pub out: PathBuf,
    pub ref_nx: Option<usize>,
    pub ref_nt: Option<usize>,
}

/// One source of settings, e.g. a file or the command line.
#[derive(Clone, Debug, Default)]
pub struct Layer(BTreeMap<String, String>);

impl Layer {
    pub fn parse_file(text: &str) -> Result<Self, ConfigError> {
        let mut layer = Layer::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let key = normalize(k.trim());
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { key: k.trim().to_string(), line: Some(i + 1) });
            }
            layer.0.insert(key, v.trim().to_string());
        }
        Ok(layer)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key, line: None });
        }
        self.0.insert(key, value.into());
        Ok(())
    }

    /// `self` with every key of `top` taking precedence. Setting a scalar
    /// key also clears its ladder counterpart below, and vice versa.
    pub fn overlay(mut self, top: &Layer) -> Self {
        for (k, v) in &top.0 {
            let partner = match k.as_str() {
                "nx" => Some("nx-ladder"),
                "nx-ladder" => Some("nx"),
                "nt" => Some("nt-ladder"),
                "nt-ladder" => Some("nt"),
                _ => None,
            };
            if let Some(p) = partner {
                if !top.0.contains_key(p) {
                    self.0.remove(p);
                }
            }
            self.0.insert(k.clone(), v.clone());
        }
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn normalize(key: &str) -> String {
    let k = key.replace('_', "-");
    if k.eq_ignore_ascii_case("t") || k.eq_ignore_ascii_case("horizon") {
        "T".into()
    } else {
        k.to_ascii_lowercase()
    }
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.into(), value: value.into(), reason: reason.into() }
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse().map_err(|_| invalid(key, v, "expected a positive integer"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.trim().parse().map_err(|_| invalid(key, v, "expected a number"))?;
    if !x.is_finite() {
        return Err(invalid(key, v, "must be finite"));
    }
    Ok(x)
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    let mut out = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_usize(key, s))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(invalid(key, v, "empty list"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn check_nx(key: &str, nx: usize) -> Result<(), ConfigError> {
    if nx < 2 || !nx.is_multiple_of(2) {
        return Err(invalid(key, &nx.to_string(), "nx must be even and >= 2"));
    }
    Ok(())
}

fn check_nt(key: &str, nt: usize) -> Result<(), ConfigError> {
    if !nt.is_power_of_two() {
        return Err(invalid(key, &nt.to_string(), "nt must be a power of two"));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_layer(layer: &Layer) -> Result<Self, ConfigError> {
        let command = match layer.get("command") {
            Some(c) => Command::parse(c).ok_or_else(|| {
                invalid("command", c, "expected solve, convergence, oracle-check or transform-check")
            })?,
            None => Command::Solve,
        };
        for (a, b) in [("nx", "nx-ladder"), ("nt", "nt-ladder")] {
            if layer.get(a).is_some() && layer.get(b).is_some() {
                return Err(ConfigError::Conflict(a, b));
            }
        }

        let nx_ladder = match (layer.get("nx"), layer.get("nx-ladder")) {
            (Some(v), _) => vec![parse_usize("nx", v)?],
            (_, Some(v)) => parse_list("nx-ladder", v)?,
            _ => vec![8],
        };
        let nx_key = if layer.get("nx-ladder").is_some() { "nx-ladder" } else { "nx" };
        for &nx in &nx_ladder {
            check_nx(nx_key, nx)?;
        }

        let nt_ladder = match (layer.get("nt"), layer.get("nt-ladder")) {
            (Some(v), _) => vec![parse_usize("nt", v)?],
            (_, Some(v)) => parse_list("nt-ladder", v)?,
            _ => vec![64],
        };
        for &nt in &nt_ladder {
            if nt == 0 {
                return Err(invalid("nt", "0", "need at least one step"));
            }
            if layer.get("nt-ladder").is_some() {
                check_nt("nt-ladder", nt)?;
            }
        }

        let horizon = layer.get("T").map(|v| parse_f64("T", v)).transpose()?.unwrap_or(1.0);
        if horizon <= 0.0 {
            return Err(invalid("T", &horizon.to_string(), "must be > 0"));
        }
        let default_lambda = if command == Command::TransformCheck { 1.0 } else { 0.0 };
        let lambda = layer.get("lambda").map(|v| parse_f64("lambda", v)).transpose()?.unwrap_or(default_lambda);
        if lambda < 0.0 {
            return Err(invalid("lambda", &lambda.to_string(), "must be >= 0"));
        }
        if command == Command::TransformCheck && lambda == 0.0 {
            return Err(invalid("lambda", "0", "transform-check needs a positive shift"));
        }

        let field = |key: &str, default: FieldSpec| -> Result<FieldSpec, ConfigError> {
            match layer.get(key) {
                Some(v) => v.parse().map_err(|e: dre_core::Error| invalid(key, v, e.to_string())),
                None => Ok(default),
            }
        };
        let xi = field("xi", FieldSpec::default_xi())?;
        let zeta = field("zeta", FieldSpec::default_zeta())?;

        let coupling = match layer.get("coupling") {
            None | Some("none") => Coupling::None,
            Some("tau-h2") | Some("tau-equals-h-squared") => Coupling::TauEqualsHSquared,
            Some(v) => return Err(invalid("coupling", v, "expected none or tau-h2")),
        };

        let ref_nx = layer.get("ref-nx").map(|v| parse_usize("ref-nx", v)).transpose()?;
        if let Some(nx) = ref_nx {
            check_nx("ref-nx", nx)?;
        }
        let ref_nt = layer.get("ref-nt").map(|v| parse_usize("ref-nt", v)).transpose()?;
        if let Some(nt) = ref_nt {
            check_nt("ref-nt", nt)?;
        }

        Ok(RunConfig {
            command,
            nx_ladder,
            nt_ladder,
            horizon,
            lambda,
            xi,
            zeta,
            coupling,
            out: PathBuf::from(layer.get("out").unwrap_or("drelab-out")),
            ref_nx,
            ref_nt,
        })
    }
}
