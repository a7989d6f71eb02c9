//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once. Lists are comma separated. Every key read by a command is
//! recorded, with defaults filled in, so the report can echo the effective
//! configuration; keys no command reads are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hdustat::KernelSpec;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default)]
pub struct Config {
    raw: BTreeMap<String, String>,
    /// Resolved values in canonical text form, keyed like the file.
    echo: BTreeMap<String, String>,
    base_dir: PathBuf,
}

fn err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut raw = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", no + 1));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return err(format!("line {}: invalid key `{key}`", no + 1));
            }
            if raw
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return err(format!("line {}: duplicate key `{key}`", no + 1));
            }
        }
        Ok(Self {
            raw,
            ..Self::default()
        })
    }

    /// Reads a file; relative data paths inside it resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.raw.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        let Some(text) = self.raw.get(key) else {
            return Ok(None);
        };
        match text.parse::<T>() {
            Ok(v) => Ok(Some(v)),
            Err(_) => err(format!("`{key}`: cannot parse `{text}`")),
        }
    }

    fn record(&mut self, key: &str, value: String) {
        self.echo.insert(key.to_string(), value);
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> CliResult<f64> {
        let v = self.take::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return err(format!("`{key}` must be finite"));
        }
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn f64_opt(&mut self, key: &str) -> CliResult<Option<f64>> {
        match self.raw.contains_key(key) {
            true => self.f64_or(key, 0.0).map(Some),
            false => Ok(None),
        }
    }

    pub fn f64_req(&mut self, key: &str) -> CliResult<f64> {
        self.require(key)?;
        self.f64_or(key, 0.0)
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> CliResult<usize> {
        let v = self.take::<usize>(key)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn usize_opt(&mut self, key: &str) -> CliResult<Option<usize>> {
        match self.raw.contains_key(key) {
            true => self.usize_or(key, 0).map(Some),
            false => Ok(None),
        }
    }

    pub fn usize_req(&mut self, key: &str) -> CliResult<usize> {
        self.require(key)?;
        self.usize_or(key, 0)
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> CliResult<u64> {
        let v = self.take::<u64>(key)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn string_or(&mut self, key: &str, default: &str) -> CliResult<String> {
        let v = self
            .raw
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string());
        self.record(key, v.clone());
        Ok(v)
    }

    pub fn f64_list_or(&mut self, key: &str, default: &[f64]) -> CliResult<Vec<f64>> {
        let v = match self.raw.get(key) {
            None => default.to_vec(),
            Some(text) => parse_list::<f64>(key, text)?,
        };
        if v.iter().any(|x| !x.is_finite()) {
            return err(format!("`{key}` entries must be finite"));
        }
        self.record(key, join(&v));
        Ok(v)
    }

    pub fn usize_list_or(&mut self, key: &str, default: &[usize]) -> CliResult<Vec<usize>> {
        let v = match self.raw.get(key) {
            None => default.to_vec(),
            Some(text) => parse_list::<usize>(key, text)?,
        };
        self.record(key, join(&v));
        Ok(v)
    }

    pub fn kernel(&mut self) -> CliResult<KernelSpec> {
        let text = self
            .raw
            .get("kernel")
            .cloned()
            .unwrap_or_else(|| "gmd".into());
        let spec: KernelSpec = text
            .parse()
            .map_err(|e: hdustat::Error| CliError::Config(format!("`kernel`: {e}")))?;
        spec.validate()?;
        self.record("kernel", spec.to_string());
        Ok(spec)
    }

    pub fn alpha(&mut self) -> CliResult<f64> {
        let a = self.f64_or("alpha", 0.05)?;
        if !(a > 0.0 && a < 1.0) {
            return err(format!("`alpha` must lie in (0, 1), got {a}"));
        }
        Ok(a)
    }

    /// An existing input file.
    pub fn path_req(&mut self, key: &str) -> CliResult<PathBuf> {
        self.require(key)?;
        let text = self.raw[key].clone();
        let path = self.base_dir.join(&text);
        if !path.is_file() {
            return err(format!("`{key}`: no such file {}", path.display()));
        }
        self.record(key, text);
        Ok(path)
    }

    /// An output file path; it need not exist.
    pub fn out_path_req(&mut self, key: &str) -> CliResult<PathBuf> {
        self.require(key)?;
        let text = self.raw[key].clone();
        self.record(key, text.clone());
        Ok(self.base_dir.join(text))
    }

    fn require(&self, key: &str) -> CliResult<()> {
        match self.raw.contains_key(key) {
            true => Ok(()),
            false => err(format!("missing required key `{key}`")),
        }
    }

    /// Fails on keys nobody read, then returns the echo of resolved values.
    pub fn finish(self) -> CliResult<BTreeMap<String, String>> {
        let unknown: Vec<&String> = self
            .raw
            .keys()
            .filter(|k| !self.echo.contains_key(*k))
            .collect();
        if !unknown.is_empty() {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return err(format!(
                "unknown key(s) for this command: {}",
                names.join(", ")
            ));
        }
        Ok(self.echo)
    }
}

fn parse_list<T: FromStr>(key: &str, text: &str) -> CliResult<Vec<T>> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return err(format!("`{key}`: empty list entry in `{text}`"));
    }
    items
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{s}`")))
        })
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}
