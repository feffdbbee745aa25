//! Config loading, run directories and provenance sidecars.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Overlay `patch` onto `base`. Every key in `patch` must already exist in
/// `base`, so typos fail instead of being ignored.
pub fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let sub = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b.get_mut(k).ok_or_else(|| anyhow!("unknown config key `{sub}`"))?;
                merge(slot, v, &sub)?;
            }
            Ok(())
        }
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

/// Apply `key.path=value`. The value is parsed as JSON and falls back to a
/// plain string.
pub fn apply_set(config: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("expected KEY=VALUE, got `{assignment}`"))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut patch = value;
    for part in key.rsplit('.') {
        let mut m = serde_json::Map::new();
        m.insert(part.to_string(), patch);
        patch = Value::Object(m);
    }
    merge(config, &patch, "")
}

/// Resolve a config: defaults, then the JSON file, then each `--set`.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>, sets: &[String]) -> Result<(T, Value)> {
    let mut value = serde_json::to_value(defaults)?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let patch: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        merge(&mut value, &patch, "")?;
    }
    for s in sets {
        apply_set(&mut value, s)?;
    }
    let config = serde_json::from_value(value.clone()).context("invalid config")?;
    // Round-trip so the hash covers the normalized form.
    let value = serde_json::to_value(&config)?;
    Ok((config, value))
}

/// SHA-256 of the canonical JSON encoding (object keys are sorted).
pub fn config_hash(value: &Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    config: &'a Value,
    config_sha256: String,
    git: String,
    version: &'static str,
    threads: usize,
    started_unix: u64,
    wall_time: f64,
    outputs: &'a [String],
    criteria: &'a [Criterion],
}

pub struct RunDir {
    path: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self> {
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self { path, outputs: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        if rows.is_empty() {
            bail!("refusing to write empty table {name}");
        }
        let mut w = csv::Writer::from_path(self.path.join(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.path.join(name), text + "\n")?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn finish(self, command: &str, config: &Value, started: SystemTime, criteria: &[Criterion]) -> Result<()> {
        let sidecar = Sidecar {
            command,
            config,
            config_sha256: config_hash(config),
            git: git_describe(),
            version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_time: started.elapsed().map(|d| d.as_secs_f64()).unwrap_or(f64::NAN),
            outputs: &self.outputs,
            criteria,
        };
        let text = serde_json::to_string_pretty(&sidecar)?;
        fs::write(self.path.join("run.json"), text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn set_patches_nested_keys() {
        let mut v = json!({"a": {"b": 1, "c": [1.0]}, "d": "x"});
        apply_set(&mut v, "a.b=3").unwrap();
        apply_set(&mut v, "a.c=[0.5,2]").unwrap();
        apply_set(&mut v, "d=hello").unwrap();
        assert_eq!(v, json!({"a": {"b": 3, "c": [0.5, 2]}, "d": "hello"}));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = json!({"a": {"b": 1}});
        assert!(apply_set(&mut v, "a.z=1").is_err());
        assert!(apply_set(&mut v, "novalue").is_err());
        assert!(merge(&mut v, &json!({"q": 1}), "").is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"x": 1, "y": 2}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"y": 2, "x": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
