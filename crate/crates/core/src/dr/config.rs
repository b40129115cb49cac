use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Which algorithm produces the embedding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Pca,
    Tsne,
    /// Delegated to a registered backend process, e.g. `external:umap`.
    External(String),
}

impl Method {
    /// Prefix used in dotted recommendation names (`tsne.perplexity`,
    /// `umap.n_neighbors`).
    pub fn short_name(&self) -> &str {
        match self {
            Self::Pca => "pca",
            Self::Tsne => "tsne",
            Self::External(name) => name,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pca => f.write_str("pca"),
            Self::Tsne => f.write_str("tsne"),
            Self::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Self::Pca),
            "tsne" | "t-sne" => Ok(Self::Tsne),
            _ => match s.strip_prefix("external:") {
                Some(name) if !name.is_empty() => Ok(Self::External(name.to_string())),
                _ => Err(Error::UnknownMethod {
                    method: s.to_string(),
                    registered: "pca, tsne, external:<name>".into(),
                }),
            },
        }
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(v) => Some(*v as f64),
            Self::Float(v) => Some(*v),
            Self::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Text(s) => Some(s),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Self::Int(v) => Value::from(*v),
            Self::Float(v) => Value::from(*v),
            Self::Text(s) => Value::from(s.clone()),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Int(v) => write!(f, "{v}"),
            Self::Float(v) => write!(f, "{v:?}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Int,
    Float,
    Text,
}

/// Value type of the well-known hyperparameters; unknown keys are inferred.
pub fn param_kind(key: &str) -> Option<ParamKind> {
    Some(match key {
        "perplexity" | "learning_rate" | "min_dist" | "early_exaggeration" => ParamKind::Float,
        "n_iter" | "n_pcs" | "n_neighbors" | "n_components" | "seed" => ParamKind::Int,
        "solver" => ParamKind::Text,
        _ => return None,
    })
}

/// Display order for parameters; anything else follows alphabetically.
const CANONICAL_ORDER: &[&str] = &[
    "perplexity",
    "learning_rate",
    "n_iter",
    "n_pcs",
    "n_neighbors",
    "min_dist",
    "n_components",
    "solver",
    "seed",
];

/// Parses `raw` into the type expected for `key`. Integers accept a
/// fractional spelling and are rounded.
pub fn parse_param(key: &str, raw: &str) -> Result<ParamValue> {
    let raw = raw.trim();
    let bad = || Error::Config(format!("`{raw}` is not a valid value for `{key}`"));
    match param_kind(key) {
        Some(ParamKind::Int) => {
            let v: f64 = raw.parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            Ok(ParamValue::Int(v.round() as i64))
        }
        Some(ParamKind::Float) => {
            let v: f64 = raw.parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            Ok(ParamValue::Float(v))
        }
        Some(ParamKind::Text) => Ok(ParamValue::Text(raw.to_string())),
        None => Ok(if let Ok(i) = raw.parse::<i64>() {
            ParamValue::Int(i)
        } else if let Ok(f) = raw.parse::<f64>() {
            ParamValue::Float(f)
        } else {
            ParamValue::Text(raw.to_string())
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

/// Default validity envelopes for a dataset with `n` rows and `d` features.
/// Perplexity is further capped so that `3 * perplexity < n`.
pub fn default_bounds(n: usize, d: usize) -> BTreeMap<String, Bounds> {
    let mut b = BTreeMap::new();
    let mut put = |k: &str, min: f64, max: f64| {
        if max >= min {
            b.insert(k.to_string(), Bounds { min, max });
        }
    };
    put("perplexity", 5.0, 100f64.min((n as f64 - 1.0) / 3.0));
    put("learning_rate", 10.0, 1000.0);
    put("n_iter", 250.0, 5000.0);
    put("n_pcs", 2.0, d.min(100) as f64);
    put("n_neighbors", 2.0, 200f64.min(n as f64 - 1.0));
    put("min_dist", 0.0, 0.99);
    put("n_components", 2.0, 2.0);
    b
}

/// A method plus its hyperparameters and their valid ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrConfig {
    pub method: Method,
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub bounds: BTreeMap<String, Bounds>,
}

/// A clamp or skip that happened while changing a parameter.
pub type Warning = String;

impl DrConfig {
    /// The baseline t-SNE setup: perplexity 30, learning rate 200, 1000
    /// iterations on 20 principal components.
    pub fn tsne(n: usize, d: usize) -> Self {
        let mut c = Self::empty(Method::Tsne, n, d);
        c.params
            .insert("perplexity".into(), ParamValue::Float(30.0));
        c.params
            .insert("learning_rate".into(), ParamValue::Float(200.0));
        c.params.insert("n_iter".into(), ParamValue::Int(1000));
        c.params
            .insert("n_pcs".into(), ParamValue::Int(20.min(d) as i64));
        c.params.insert("seed".into(), ParamValue::Int(0));
        c
    }

    pub fn pca(n: usize, d: usize) -> Self {
        let mut c = Self::empty(Method::Pca, n, d);
        c.params.insert("n_components".into(), ParamValue::Int(2));
        c.params
            .insert("solver".into(), ParamValue::Text("full".into()));
        c.params.insert("seed".into(), ParamValue::Int(0));
        c
    }

    pub fn external(name: &str, n: usize, d: usize) -> Self {
        let mut c = Self::empty(Method::External(name.to_string()), n, d);
        c.params.insert(
            "n_neighbors".into(),
            ParamValue::Int(15.min(n.saturating_sub(1)) as i64),
        );
        c.params.insert("min_dist".into(), ParamValue::Float(0.1));
        c.params
            .insert("n_pcs".into(), ParamValue::Int(20.min(d) as i64));
        c.params.insert("seed".into(), ParamValue::Int(0));
        c
    }

    /// Default configuration for `method`.
    pub fn for_method(method: Method, n: usize, d: usize) -> Self {
        match method {
            Method::Pca => Self::pca(n, d),
            Method::Tsne => Self::tsne(n, d),
            Method::External(name) => Self::external(&name, n, d),
        }
    }

    fn empty(method: Method, n: usize, d: usize) -> Self {
        Self {
            method,
            params: BTreeMap::new(),
            bounds: default_bounds(n, d),
        }
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.params.get(key)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .and_then(ParamValue::as_f64)
            .ok_or_else(|| {
                Error::Config(format!(
                    "{} requires numeric parameter `{key}`",
                    self.method
                ))
            })
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let v = self.get_f64(key)?;
        if v < 0.0 {
            return Err(Error::Config(format!(
                "`{key}` must be nonnegative, got {v}"
            )));
        }
        Ok(v.round() as usize)
    }

    pub fn seed(&self) -> u64 {
        self.get_f64("seed").map_or(0, |v| v as i64 as u64)
    }

    pub fn required_params(&self) -> &'static [&'static str] {
        match self.method {
            Method::Tsne => &["perplexity", "learning_rate", "n_iter", "n_pcs"],
            Method::Pca => &["n_components"],
            Method::External(_) => &[],
        }
    }

    /// Parameters the method knows about (present or bounded).
    pub fn is_known_param(&self, key: &str) -> bool {
        if self.params.contains_key(key) {
            return true;
        }
        match self.method {
            Method::Tsne => matches!(
                key,
                "perplexity" | "learning_rate" | "n_iter" | "n_pcs" | "seed"
            ),
            Method::Pca => matches!(key, "n_components" | "solver" | "seed"),
            Method::External(_) => matches!(key, "n_neighbors" | "min_dist" | "n_pcs" | "seed"),
        }
    }

    /// Maps a possibly dotted name (`tsne.perplexity`) to a parameter key of
    /// this config.
    pub fn resolve_param<'a>(&self, name: &'a str) -> Option<&'a str> {
        let key = match name.split_once('.') {
            Some((prefix, key)) => {
                let ok = prefix.eq_ignore_ascii_case(self.method.short_name())
                    || (matches!(self.method, Method::Tsne)
                        && prefix.eq_ignore_ascii_case("t-sne"))
                    || (key == "n_pcs" && prefix.eq_ignore_ascii_case("pca"));
                if !ok {
                    return None;
                }
                key
            }
            None => name,
        };
        self.is_known_param(key).then_some(key)
    }

    pub fn validate(&self) -> Result<()> {
        for key in self.required_params() {
            if !self.params.contains_key(*key) {
                return Err(Error::Config(format!(
                    "{} requires parameter `{key}`",
                    self.method
                )));
            }
        }
        for (key, value) in &self.params {
            if let (Some(b), Some(v)) = (self.bounds.get(key), value.as_f64()) {
                if !b.contains(v) {
                    return Err(Error::Config(format!(
                        "`{key}` = {value} is outside [{}, {}]",
                        b.min, b.max
                    )));
                }
            }
        }
        if let Some(s) = self.params.get("solver") {
            if !matches!(s.as_str(), Some("full" | "randomized")) {
                return Err(Error::Config(format!(
                    "solver must be `full` or `randomized`, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// Sets `key` from its textual form, clamping into bounds. Returns a
    /// warning when clamping happened.
    pub fn set_param_str(&mut self, key: &str, raw: &str) -> Result<Option<Warning>> {
        let value = parse_param(key, raw)?;
        Ok(self.set_param(key, value))
    }

    pub fn set_param(&mut self, key: &str, value: ParamValue) -> Option<Warning> {
        let (value, warning) = self.clamped(key, value);
        self.params.insert(key.to_string(), value);
        warning
    }

    /// Moves every parameter into its bounds, e.g. the baseline perplexity on
    /// a dataset too small for it.
    pub fn clamp_all(&mut self) -> Vec<Warning> {
        let params = std::mem::take(&mut self.params);
        params
            .into_iter()
            .filter_map(|(k, v)| self.set_param(&k, v))
            .collect()
    }

    /// `value` moved into the bounds of `key`, with a warning if it moved.
    pub fn clamped(&self, key: &str, value: ParamValue) -> (ParamValue, Option<Warning>) {
        let (Some(b), Some(v)) = (self.bounds.get(key), value.as_f64()) else {
            return (value, None);
        };
        if b.contains(v) {
            return (value, None);
        }
        let c = b.clamp(v);
        let clamped = match value {
            ParamValue::Int(_) => ParamValue::Int(c.round() as i64),
            _ => ParamValue::Float(c),
        };
        let warning = format!(
            "`{key}` = {value} outside [{}, {}], clamped to {clamped}",
            b.min, b.max
        );
        log::warn!("{warning}");
        (clamped, Some(warning))
    }

    /// `{"method": ..., <params in canonical order>}`.
    pub fn parameters_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("method".into(), Value::from(self.method.to_string()));
        for key in CANONICAL_ORDER {
            if let Some(v) = self.params.get(*key) {
                m.insert(key.to_string(), v.to_json());
            }
        }
        for (k, v) in &self.params {
            if !CANONICAL_ORDER.contains(&k.as_str()) {
                m.insert(k.clone(), v.to_json());
            }
        }
        Value::Object(m)
    }
}
