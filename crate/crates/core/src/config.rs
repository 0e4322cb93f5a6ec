//! Flat `key = value` configuration files.
//!
//! Every value is a number. Files are parsed with a TOML reader, so `#`
//! comments, integers and exponent notation all work. Readers collect every
//! problem they see instead of stopping at the first one; [`ConfigErrors`]
//! carries the whole list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

/// One problem found while reading a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

/// Aggregated configuration problems.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    pub fn push(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            key: key.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn extend(&mut self, other: ConfigErrors) {
        self.0.extend(other.0);
    }

    pub fn into_result(self) -> Result<(), ConfigErrors> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "`{}`: {}", issue.key, issue.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Parsed contents of a flat numeric key-value file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, f64>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let mut errors = ConfigErrors::default();
        let table: toml::Table = match text.parse() {
            Ok(t) => t,
            Err(e) => {
                errors.push("<file>", format!("not a key = value file: {}", e.message()));
                return Err(errors);
            }
        };
        let mut entries = BTreeMap::new();
        for (key, value) in table {
            match value {
                toml::Value::Float(x) => {
                    entries.insert(key, x);
                }
                toml::Value::Integer(i) => {
                    entries.insert(key, i as f64);
                }
                other => errors.push(key, format!("expected a number, found {}", other.type_str())),
            }
        }
        errors.into_result()?;
        Ok(KvFile { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigErrors> {
        let path = path.as_ref();
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) => {
                let mut errors = ConfigErrors::default();
                errors.push(path.display().to_string(), format!("cannot read config file: {e}"));
                Err(errors)
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: f64) {
        self.entries.insert(key.into(), value);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merges `other` on top of `self`; keys in `other` win.
    pub fn overlay(&mut self, other: &KvFile) {
        for (k, v) in other.iter() {
            self.insert(k, v);
        }
    }
}

/// Bound a config value must satisfy.
#[derive(Debug, Clone, Copy)]
pub enum Bound {
    Any,
    Positive,
    NonNegative,
    /// Inclusive range.
    Within(f64, f64),
    /// Half-open interval `(lo, hi]`.
    AboveUpTo(f64, f64),
}

impl Bound {
    fn check(self, x: f64) -> Option<String> {
        if !x.is_finite() {
            return Some("must be finite".into());
        }
        match self {
            Bound::Any => None,
            Bound::Positive if x <= 0.0 => Some(format!("must be > 0 (got {x})")),
            Bound::NonNegative if x < 0.0 => Some(format!("must be >= 0 (got {x})")),
            Bound::Within(lo, hi) if !(lo..=hi).contains(&x) => {
                Some(format!("must lie in [{lo}, {hi}] (got {x})"))
            }
            Bound::AboveUpTo(lo, hi) if !(x > lo && x <= hi) => {
                Some(format!("must lie in ({lo}, {hi}] (got {x})"))
            }
            _ => None,
        }
    }
}

/// Reads typed values out of a [`KvFile`], remembering which keys were used
/// and collecting bound violations.
pub struct KvReader<'a> {
    file: &'a KvFile,
    used: BTreeSet<String>,
    errors: ConfigErrors,
    resolved: BTreeMap<String, f64>,
}

impl<'a> KvReader<'a> {
    pub fn new(file: &'a KvFile) -> Self {
        KvReader {
            file,
            used: BTreeSet::new(),
            errors: ConfigErrors::default(),
            resolved: BTreeMap::new(),
        }
    }

    /// Returns the value for `key` (or `default`), checking it against `bound`.
    /// On a violation the default is returned and the error recorded.
    pub fn number(&mut self, key: &str, default: f64, bound: Bound) -> f64 {
        self.used.insert(key.to_string());
        let value = match self.file.get(key) {
            Some(v) => match bound.check(v) {
                None => v,
                Some(msg) => {
                    self.errors.push(key, msg);
                    default
                }
            },
            None => default,
        };
        self.resolved.insert(key.to_string(), value);
        value
    }

    /// Integer-valued key within `[min, max]`.
    pub fn integer(&mut self, key: &str, default: u64, min: u64, max: u64) -> u64 {
        let x = self.number(key, default as f64, Bound::Within(min as f64, max as f64));
        if x.fract() != 0.0 {
            self.errors.push(key, format!("must be an integer (got {x})"));
            self.resolved.insert(key.to_string(), default as f64);
            return default;
        }
        x as u64
    }

    /// Like [`number`](Self::number) but the key has no default.
    pub fn optional(&mut self, key: &str, bound: Bound) -> Option<f64> {
        self.used.insert(key.to_string());
        let v = self.file.get(key)?;
        if let Some(msg) = bound.check(v) {
            self.errors.push(key, msg);
            return None;
        }
        self.resolved.insert(key.to_string(), v);
        Some(v)
    }

    /// All keys present in the underlying file.
    pub fn file_keys(&self) -> Vec<String> {
        self.file.keys().map(String::from).collect()
    }

    /// Marks keys matching `pred` as recognised without reading them.
    pub fn accept_matching(&mut self, pred: impl Fn(&str) -> bool) {
        let keys: Vec<String> = self.file.keys().filter(|k| pred(k)).map(String::from).collect();
        self.used.extend(keys);
    }

    pub fn error(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.errors.push(key, message);
    }

    /// Fully resolved key/value pairs read so far, defaults included.
    pub fn resolved(&self) -> &BTreeMap<String, f64> {
        &self.resolved
    }

    /// Consumes the reader. Keys in the file that were never read are
    /// reported as unknown when `strict` is set.
    pub fn finish(mut self, strict: bool) -> Result<BTreeMap<String, f64>, ConfigErrors> {
        if strict {
            for key in self.file.keys() {
                if !self.used.contains(key) {
                    self.errors.push(key, "unknown key");
                }
            }
        }
        self.errors.into_result()?;
        Ok(self.resolved)
    }

    pub fn into_parts(self) -> (BTreeMap<String, f64>, BTreeSet<String>, ConfigErrors) {
        (self.resolved, self.used, self.errors)
    }
}
