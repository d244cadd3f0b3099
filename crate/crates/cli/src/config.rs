//! Experiment configuration: a TOML document read as flat dotted keys.
//!
//! Every key must be consumed by the experiment it configures; leftovers are
//! reported as unknown before any computation starts.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use szego_core::C64;
use toml::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug)]
pub struct Config {
    /// Origin of the text, used in messages and to resolve relative paths.
    pub source: String,
    pub base_dir: PathBuf,
    entries: BTreeMap<String, Value>,
    used: RefCell<BTreeSet<String>>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

impl Config {
    pub fn parse(text: &str, source: &str, base_dir: &Path) -> ConfigResult<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1));
            match line {
                Some(l) => ConfigError(format!("{source}: parse error at line {l}: {}", e.message())),
                None => ConfigError(format!("{source}: parse error: {}", e.message())),
            }
        })?;
        let mut entries = BTreeMap::new();
        flatten("", &table, &mut entries);
        Ok(Self { source: source.to_string(), base_dir: base_dir.to_path_buf(), entries, used: RefCell::new(BTreeSet::new()) })
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    fn err<T>(&self, key: &str, msg: impl fmt::Display) -> ConfigResult<T> {
        Err(ConfigError(format!("{}: key `{key}`: {msg}", self.source)))
    }

    fn take(&self, key: &str) -> Option<&Value> {
        let v = self.entries.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Keys under `prefix.` (without the prefix), marked as used.
    pub fn section(&self, prefix: &str) -> Vec<(String, Value)> {
        let head = format!("{prefix}.");
        let found: Vec<(String, Value)> = self
            .entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&head).map(|rest| (rest.to_string(), v.clone())))
            .collect();
        for (k, _) in &found {
            self.used.borrow_mut().insert(format!("{head}{k}"));
        }
        found
    }

    pub fn opt_f64(&self, key: &str) -> ConfigResult<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => value_f64(v).map(Some).or_else(|m| self.err(key, m)),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> ConfigResult<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn req_f64(&self, key: &str) -> ConfigResult<f64> {
        self.opt_f64(key)?.map_or_else(|| self.err(key, "missing"), Ok)
    }

    pub fn usize(&self, key: &str, default: usize) -> ConfigResult<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => self.err(key, format!("expected a nonnegative integer, got {v}")),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> ConfigResult<u64> {
        self.usize(key, default as usize).map(|v| v as u64)
    }

    pub fn bool(&self, key: &str, default: bool) -> ConfigResult<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => self.err(key, format!("expected a boolean, got {v}")),
        }
    }

    pub fn opt_str(&self, key: &str) -> ConfigResult<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => self.err(key, format!("expected a string, got {v}")),
        }
    }

    pub fn str(&self, key: &str, default: &str) -> ConfigResult<String> {
        Ok(self.opt_str(key)?.unwrap_or_else(|| default.to_string()))
    }

    pub fn req_str(&self, key: &str) -> ConfigResult<String> {
        self.opt_str(key)?.map_or_else(|| self.err(key, "missing"), Ok)
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> ConfigResult<Vec<f64>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items.iter().map(value_f64).collect::<Result<_, _>>().or_else(|m| self.err(key, m)),
            Some(v) => self.err(key, format!("expected a list of numbers, got {v}")),
        }
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> ConfigResult<Vec<usize>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    other => Err(format!("expected a nonnegative integer, got {other}")),
                })
                .collect::<Result<_, _>>()
                .or_else(|m| self.err(key, m)),
            Some(v) => self.err(key, format!("expected a list of integers, got {v}")),
        }
    }

    pub fn str_list(&self, key: &str) -> ConfigResult<Vec<String>> {
        match self.take(key) {
            None => Ok(vec![]),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(str::to_string).ok_or_else(|| format!("expected a string, got {v}")))
                .collect::<Result<_, _>>()
                .or_else(|m| self.err(key, m)),
            Some(v) => self.err(key, format!("expected a list of strings, got {v}")),
        }
    }

    /// A complex number written as `[re, im]` or a bare real.
    pub fn opt_complex(&self, key: &str) -> ConfigResult<Option<C64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => value_complex(v).map(Some).or_else(|m| self.err(key, m)),
        }
    }

    pub fn complex(&self, key: &str, default: C64) -> ConfigResult<C64> {
        Ok(self.opt_complex(key)?.unwrap_or(default))
    }

    pub fn req_complex(&self, key: &str) -> ConfigResult<C64> {
        self.opt_complex(key)?.map_or_else(|| self.err(key, "missing"), Ok)
    }

    /// A list of complex numbers, each `[re, im]` or a bare real.
    pub fn opt_complex_list(&self, key: &str) -> ConfigResult<Option<Vec<C64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(items)) => {
                items.iter().map(value_complex).collect::<Result<Vec<_>, _>>().map(Some).or_else(|m| self.err(key, m))
            }
            Some(v) => self.err(key, format!("expected a list of complex numbers, got {v}")),
        }
    }

    /// Errors on keys no experiment asked for.
    pub fn finish(&self) -> ConfigResult<()> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.entries.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            Err(ConfigError(format!("{}: unknown keys: {}", self.source, names.join(", "))))
        }
    }
}

fn value_f64(v: &Value) -> Result<f64, String> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(format!("expected a number, got {other}")),
    }
}

fn value_complex(v: &Value) -> Result<C64, String> {
    match v {
        Value::Array(parts) if parts.len() == 2 => Ok(C64::new(value_f64(&parts[0])?, value_f64(&parts[1])?)),
        Value::Float(_) | Value::Integer(_) => Ok(C64::new(value_f64(v)?, 0.0)),
        other => Err(format!("expected [re, im], got {other}")),
    }
}
