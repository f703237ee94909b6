//! Key-value model description files.
//!
//! One `key = value` per line, `#` starts a comment. Lists are comma
//! separated. Decimal literals go through `f64::from_str`, which rounds
//! correctly to binary64.
//!
//! ```text
//! # two-patch family
//! m = 2
//! delays = 1, 2
//! mu = 1
//! alpha12 = 1
//! alpha21 = 1
//! p = sin
//! q = cos
//! nonlinearity = nicholson
//! ```
//!
//! `family = constant` switches to time-independent coefficients given by
//! `d`, `a` (row-major `m × m`), `beta` and `c`. The two-patch family also
//! accepts `beta_scale = s1, s2` to scale the birth rates.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{CoeffValues, Family, Nonlinearity, ParamSet, Shape, SystemSpec};

#[derive(Debug, Clone, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 0 when the problem is not tied to a line
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

pub const MODEL_KEYS: &[&str] = &[
    "family",
    "m",
    "delays",
    "mu",
    "alpha12",
    "alpha21",
    "p",
    "q",
    "nonlinearity",
    "beta_scale",
    "d",
    "a",
    "beta",
    "c",
];

/// Ordered key-value pairs; a later assignment of a key replaces the earlier one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut kv = KeyValues::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ParseError::new(line, format!("expected `key = value`, got `{content}`")));
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ParseError::new(line, format!("bad key `{key}`")));
            }
            kv.insert(key, value.trim(), line);
        }
        Ok(kv)
    }

    fn insert(&mut self, key: &str, value: &str, line: usize) {
        match self.entries.iter_mut().find(|(k, _, _)| k == key) {
            Some(e) => {
                e.1 = value.to_string();
                e.2 = line;
            }
            None => self.entries.push((key.to_string(), value.to_string(), line)),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.insert(key, &value.to_string(), 0);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.retain(|(k, _, _)| k != key);
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map_or(0, |e| e.2)
    }

    /// Entries of `other` override ours.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v, line) in &other.entries {
            self.insert(k, v, *line);
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    /// Fail on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), ParseError> {
        match self.entries.iter().find(|(k, _, _)| !allowed.contains(&k.as_str())) {
            Some((k, _, line)) => Err(ParseError::new(*line, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ParseError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| ParseError::new(self.line_of(key), format!("`{key}`: bad number `{v}`")))
            })
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, ParseError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| ParseError::new(self.line_of(key), format!("`{key}`: bad integer `{v}`")))
            })
            .transpose()
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ParseError> {
        self.get(key)
            .map(|v| parse_list(v).map_err(|m| ParseError::new(self.line_of(key), format!("`{key}`: {m}"))))
            .transpose()
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ParseError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| ParseError::new(self.line_of(key), format!("`{key}`: {e}")))
            })
            .transpose()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v, _) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
        })
        .collect()
}

pub fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn require<T>(value: Option<T>, key: &str) -> Result<T, ParseError> {
    value.ok_or_else(|| ParseError::new(0, format!("missing key `{key}`")))
}

/// Build a system from the model keys (other keys are ignored).
pub fn spec_from_key_values(kv: &KeyValues) -> Result<SystemSpec, ParseError> {
    let family = kv.get("family").unwrap_or("twopatch");
    let nonlinearity: Nonlinearity = kv.parsed("nonlinearity")?.unwrap_or(Nonlinearity::NicholsonExp);
    let model_err = |e: crate::ModelError| ParseError::new(0, e.to_string());
    let spec = match family {
        "twopatch" => {
            let delays = kv.f64_list("delays")?.unwrap_or_else(|| vec![1.0, 2.0]);
            let params = ParamSet::new(
                kv.f64("mu")?.unwrap_or(1.0),
                kv.f64("alpha12")?.unwrap_or(1.0),
                kv.f64("alpha21")?.unwrap_or(1.0),
            )
            .map_err(model_err)?;
            let beta_scale = match kv.f64_list("beta_scale")? {
                None => [1.0, 1.0],
                Some(v) if v.len() == 2 => [v[0], v[1]],
                Some(v) => {
                    return Err(ParseError::new(
                        kv.line_of("beta_scale"),
                        format!("`beta_scale` needs 2 values, got {}", v.len()),
                    ))
                }
            };
            for key in ["d", "a", "beta", "c"] {
                if kv.get(key).is_some() {
                    return Err(ParseError::new(
                        kv.line_of(key),
                        format!("`{key}` only applies to `family = constant`"),
                    ));
                }
            }
            SystemSpec::new(
                Family::TwoPatch { params, beta_scale },
                delays,
                nonlinearity,
                kv.parsed("p")?.unwrap_or(Shape::Sin),
                kv.parsed("q")?.unwrap_or(Shape::Cos),
            )
            .map_err(model_err)?
        }
        "constant" => {
            for key in ["mu", "alpha12", "alpha21", "beta_scale", "p", "q"] {
                if kv.get(key).is_some() {
                    return Err(ParseError::new(
                        kv.line_of(key),
                        format!("`{key}` does not apply to `family = constant`"),
                    ));
                }
            }
            let d = require(kv.f64_list("d")?, "d")?;
            let m = d.len();
            let flat = require(kv.f64_list("a")?, "a")?;
            if flat.len() != m * m {
                return Err(ParseError::new(
                    kv.line_of("a"),
                    format!("`a` needs {} values for {m} patches, got {}", m * m, flat.len()),
                ));
            }
            let values = CoeffValues {
                d,
                a: flat.chunks(m).map(|r| r.to_vec()).collect(),
                beta: require(kv.f64_list("beta")?, "beta")?,
                c: require(kv.f64_list("c")?, "c")?,
            };
            let delays = require(kv.f64_list("delays")?, "delays")?;
            SystemSpec::constant(values, delays, nonlinearity).map_err(model_err)?
        }
        other => {
            return Err(ParseError::new(
                kv.line_of("family"),
                format!("unknown family `{other}` (expected twopatch or constant)"),
            ))
        }
    };
    if let Some(m) = kv.usize("m")? {
        if m != spec.dim() {
            return Err(ParseError::new(
                kv.line_of("m"),
                format!("`m = {m}` but the model has {} patches", spec.dim()),
            ));
        }
    }
    Ok(spec)
}

pub fn parse_model(text: &str) -> Result<SystemSpec, ParseError> {
    let kv = KeyValues::parse(text)?;
    kv.reject_unknown(MODEL_KEYS)?;
    spec_from_key_values(&kv)
}

/// Model keys describing `spec`; parsing them back yields the same system.
pub fn spec_to_key_values(spec: &SystemSpec) -> KeyValues {
    let mut kv = KeyValues::default();
    match spec.family() {
        Family::TwoPatch { params, beta_scale } => {
            kv.set("family", "twopatch");
            kv.set("m", spec.dim());
            kv.set("delays", format_list(spec.delays()));
            kv.set("mu", params.mu());
            kv.set("alpha12", params.alpha12());
            kv.set("alpha21", params.alpha21());
            let (p, q) = spec.shapes();
            kv.set("p", p);
            kv.set("q", q);
            kv.set("nonlinearity", spec.nonlinearity());
            if *beta_scale != [1.0, 1.0] {
                kv.set("beta_scale", format_list(beta_scale));
            }
        }
        Family::Constant(values) => {
            kv.set("family", "constant");
            kv.set("m", spec.dim());
            kv.set("delays", format_list(spec.delays()));
            kv.set("nonlinearity", spec.nonlinearity());
            kv.set("d", format_list(&values.d));
            let flat: Vec<f64> = values.a.iter().flatten().copied().collect();
            kv.set("a", format_list(&flat));
            kv.set("beta", format_list(&values.beta));
            kv.set("c", format_list(&values.c));
        }
    }
    kv
}
