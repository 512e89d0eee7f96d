//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment line, keys are dotted
//! identifiers and values run to the end of the line. Lists are
//! comma-separated. Every key must be known, and every key present must be
//! read by the command that runs; anything else is reported against its
//! line.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Fixed keys. `learner.params.*` and `audit.*` are checked separately.
const KEYS: &[&str] = &[
    "seed",
    "dgp",
    "dgp.n",
    "dgp.p",
    "dgp.rho",
    "data",
    "data.target",
    "split.test_fraction",
    "learner.kind",
    "method.name",
    "method.feature",
    "method.features",
    "method.groups",
    "method.grid",
    "method.grid_size",
    "method.loss",
    "method.repeats",
    "method.orderings",
    "method.rows",
    "method.mode",
    "method.max_leaves",
    "method.neighborhood",
    "method.intervals",
    "method.band",
    "method.replicates",
    "method.permutations",
    "method.target_permutations",
    "method.correction",
    "method.alpha",
    "method.strategy",
    "output.dir",
];

const LEARNER_PARAMS: &[&str] = &["k", "lambda", "gamma", "n_trees", "max_depth", "max_features", "bootstrap", "min_leaf"];

pub const AUDIT_KEYS: &[&str] = &[
    "p2_loss_ratio",
    "p3_tolerance",
    "p4_warn",
    "p4_fail",
    "p5_alpha",
    "p5_max_abs_pearson",
    "p7_h_squared",
    "p8_min_replicates",
    "p9_features",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: Option<&str>, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), key: key.map(str::to_string), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError { line: None, key: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("config")?;
        if let Some(l) = self.line {
            write!(f, " line {l}")?;
        }
        if let Some(k) = &self.key {
            write!(f, ": key '{k}'")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    source: Option<PathBuf>,
    used: RefCell<BTreeSet<String>>,
}

fn known_key(key: &str) -> bool {
    if KEYS.contains(&key) {
        return true;
    }
    if let Some(p) = key.strip_prefix("learner.params.") {
        return LEARNER_PARAMS.contains(&p);
    }
    if let Some(a) = key.strip_prefix("audit.") {
        return AUDIT_KEYS.contains(&a);
    }
    false
}

fn valid_key_syntax(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|part| {
            !part.is_empty() && part.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        })
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((k, v)) = trimmed.split_once('=') else {
                return Err(ConfigError::at(line, None, format!("expected 'key = value', got '{trimmed}'")));
            };
            let (key, value) = (k.trim(), v.trim());
            if !valid_key_syntax(key) {
                return Err(ConfigError::at(line, None, format!("malformed key '{key}'")));
            }
            if !known_key(key) {
                return Err(ConfigError::at(line, Some(key), "unknown key"));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, Some(key), "missing value"));
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                return Err(ConfigError::at(line, Some(key), format!("duplicate key (first set on line {})", prev.line)));
            }
            entries.insert(key.to_string(), Entry { value: value.to_string(), line });
        }
        Ok(Config { entries, source: None, used: RefCell::new(BTreeSet::new()) })
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Config::parse(&text)?;
        c.source = Some(path.to_path_buf());
        Ok(c)
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Raw value, marking the key as used.
    pub fn raw(&self, key: &str) -> Option<&str> {
        let e = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(&e.value)
    }

    pub fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    /// Error anchored at the line of `key` (or unanchored when absent).
    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { line: self.line(key), key: Some(key.to_string()), message: message.into() }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.error(key, format!("cannot parse '{v}' as {}", type_label::<T>()))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.raw(key).map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    /// Looks `key` up in `choices` by name.
    pub fn choice<T: Copy>(&self, key: &str, choices: &[(&str, T)]) -> Result<Option<T>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        match choices.iter().find(|(n, _)| *n == v) {
            Some((_, t)) => Ok(Some(*t)),
            None => {
                let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
                Err(self.error(key, format!("unknown value '{v}' (expected one of: {})", names.join(", "))))
            }
        }
    }

    /// Marks every key under `prefix` as read; returns the keys affected.
    pub fn ignore_prefix(&self, prefix: &str) -> Vec<String> {
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        self.used.borrow_mut().extend(keys.iter().cloned());
        keys
    }

    /// Fails on the first key that is present but was never read.
    pub fn check_all_used(&self, context: &str) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        for (k, e) in &self.entries {
            if !used.contains(k) {
                return Err(ConfigError::at(e.line, Some(k), format!("not used by {context}")));
            }
        }
        Ok(())
    }

    /// Entries in key order, for the report echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }
}

fn type_label<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    match name {
        "usize" | "u64" => "a non-negative integer",
        "f64" => "a number",
        "bool" => "true or false",
        _ => "the expected type",
    }
}
