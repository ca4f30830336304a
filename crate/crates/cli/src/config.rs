//! Flat `key = value` run configuration and the resolved record written
//! next to every artifact.
//!
//! Keys carry a section prefix (`preprocess.floor`, `cv.folds`). A value
//! given on the command line beats the file, which beats the built-in
//! default. The provenance record uses the same syntax, so it can be passed
//! back through `--config` to repeat a run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "output.dir",
    "input.data",
    "input.labels",
    "input.model",
    "input.genes_as_rows",
    "input.na",
    "input.delimiter",
    "preprocess.enabled",
    "preprocess.floor",
    "preprocess.ceil",
    "preprocess.fold_min",
    "preprocess.span_min",
    "preprocess.log_base",
    "preprocess.standardize",
    "select.p_keep",
    "select.mode",
    "classifier.method",
    "classifier.family",
    "classifier.m",
    "classifier.k",
    "classifier.lambda",
    "classifier.sigma_scale",
    "classifier.kernel",
    "classifier.epsilon",
    "classifier.ridge",
    "classifier.sparsify_p",
    "classifier.stop_early",
    "cv.folds",
    "cv.inner_folds",
    "cv.repeats",
    "diagnostics.components",
    "diagnostics.center_tolerance",
    "diagnostics.width_max",
    "diagnostics.svg",
];

/// Keys present only in provenance records; read back without effect, as
/// are `checksum.*` and `result.*`.
const INFORMATIONAL: &[&str] = &["command", "version"];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if INFORMATIONAL.contains(&key) || key.starts_with("checksum.") || key.starts_with("result.") {
                continue;
            }
            if !KNOWN_KEYS.contains(&key) {
                bail!("line {}: unknown key {key:?}", i + 1);
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: key {key:?} set twice", i + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Reads values with flag > file > default precedence and records what was
/// used.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    record: Record,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile, command: &str) -> Self {
        let mut record = Record::default();
        record.push("command", command);
        record.push("version", env!("CARGO_PKG_VERSION"));
        Self { file, record }
    }

    fn file_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.file
            .raw(key)
            .map(|s| s.parse::<T>().map_err(|e| anyhow!("config key {key}: {e}")))
            .transpose()
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.record.push(key, v);
        }
        Ok(v)
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record.push(key, &v);
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>, what: &str) -> Result<T>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| anyhow!("missing {what}: pass the flag or set {key} in the config file"))
    }

    /// Comma-separated list; `None` when neither flag nor file sets it.
    pub fn list<T>(&mut self, key: &str, flag: Option<&str>) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = match flag {
            Some(s) => Some(s.to_string()),
            None => self.file.raw(key).map(str::to_string),
        };
        raw.map(|s| parse_list(&s).with_context(|| format!("list {key}")))
            .transpose()
    }

    /// The file's raw entry, for values with custom resolution.
    pub fn file_raw(&self, key: &str) -> Option<&str> {
        self.file.raw(key)
    }

    /// A value already resolved in this run.
    pub fn recorded(&self, key: &str) -> Option<&str> {
        self.record.get(key)
    }

    /// Records a derived value under `key`.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.record.push(key, value);
    }

    pub fn finish(self) -> Record {
        self.record
    }
}

pub fn parse_list<T>(s: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        bail!("empty list");
    }
    items
        .iter()
        .map(|t| t.parse::<T>().map_err(|e| anyhow!("bad item {t:?}: {e}")))
        .collect()
}

pub fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Ordered `key = value` lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Record {
    entries: Vec<(String, String)>,
}

impl Record {
    pub fn push(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# hdclass provenance v1\n");
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}
