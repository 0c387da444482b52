use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Bad flags or flag combinations.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Loads the `--config` object, if any.
pub fn load_patch(path: Option<&Path>) -> Result<Option<serde_json::Map<String, Value>>> {
    let Some(path) = path else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    match value {
        Value::Object(map) => Ok(Some(map)),
        _ => Err(usage(format!("config {} must be a JSON object", path.display()))),
    }
}

/// Replaces the top-level fields of `base` named in `patch`.
pub fn apply_patch<T: Serialize + DeserializeOwned>(
    base: &T,
    patch: Option<&serde_json::Map<String, Value>>,
) -> Result<T> {
    let Some(patch) = patch else {
        return Ok(serde_json::from_value(serde_json::to_value(base)?)?);
    };
    let mut value = serde_json::to_value(base)?;
    let obj = value.as_object_mut().expect("options serialize to objects");
    for (key, v) in patch {
        obj.insert(key.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| usage(format!("config: {e}")))
}

/// Clustering options that `--config` may override.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterOptions {
    pub method: String,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub seed: u64,
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub method: String,
    pub k_range: Option<String>,
    pub repeats: Option<usize>,
    pub seed: u64,
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    pub zero_threshold: f64,
}

/// Parses `a..b`, `a..=b` (both inclusive) or `a,b,c`.
pub fn parse_k_range(text: &str) -> Result<Vec<usize>> {
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("bad K value {s:?} in --k-range")))
    };
    let values: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b) = (parse(a)?, parse(b)?);
        (a..=b).collect()
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse)
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(usage(format!("--k-range {text:?} is empty")));
    }
    Ok(values)
}
