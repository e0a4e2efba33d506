//! Experiment configuration: a TOML document plus `--set` overrides, read
//! through accessors that report the full dotted key path on failure.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::CliError;

pub struct Config {
    root: Table,
    /// Directory of the config file; relative paths inside it resolve here.
    base_dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let root: Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, base_dir })
    }

    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let root: Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        Ok(Self {
            root,
            base_dir: PathBuf::new(),
        })
    }

    /// Apply one `key.path=value` override. The value is read as a TOML
    /// literal when it parses as one, otherwise as a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{assignment}`")))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(CliError::Config(format!("--set: bad key `{key}`")));
        }
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().expect("key has at least one part");
        let mut table = &mut self.root;
        let mut walked = String::new();
        for p in parts {
            if !walked.is_empty() {
                walked.push('.');
            }
            walked.push_str(p);
            let entry = table.entry(p).or_insert_with(|| Value::Table(Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("--set {key}: `{walked}` is not a table")))?;
        }
        table.insert(last.to_string(), value);
        Ok(())
    }

    fn lookup(&self, path: &str) -> Option<&Value> {
        let mut parts = path.split('.');
        let mut v = self.root.get(parts.next()?)?;
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    pub fn has(&self, path: &str) -> bool {
        self.lookup(path).is_some()
    }

    fn required(&self, path: &str) -> Result<&Value, CliError> {
        self.lookup(path)
            .ok_or_else(|| CliError::Config(format!("missing required key `{path}`")))
    }

    fn wrong_type(path: &str, want: &str, got: &Value) -> CliError {
        CliError::Config(format!("key `{path}`: expected {want}, got {}", got.type_str()))
    }

    pub fn str(&self, path: &str) -> Result<String, CliError> {
        let v = self.required(path)?;
        v.as_str().map(str::to_string).ok_or_else(|| Self::wrong_type(path, "a string", v))
    }

    pub fn opt_str(&self, path: &str) -> Result<Option<String>, CliError> {
        self.lookup(path).map(|_| self.str(path)).transpose()
    }

    /// Integers are accepted where floats are expected.
    pub fn f64(&self, path: &str) -> Result<f64, CliError> {
        let v = self.required(path)?;
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(Self::wrong_type(path, "a number", v)),
        }
    }

    pub fn f64_or(&self, path: &str, default: f64) -> Result<f64, CliError> {
        if self.has(path) {
            self.f64(path)
        } else {
            Ok(default)
        }
    }

    pub fn u64(&self, path: &str) -> Result<u64, CliError> {
        let v = self.required(path)?;
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            // Large counts are often written as 1e7.
            Value::Float(x) if *x >= 0.0 && x.fract() == 0.0 && *x < 1.8e19 => Ok(*x as u64),
            _ => Err(Self::wrong_type(path, "a non-negative integer", v)),
        }
    }

    pub fn u64_or(&self, path: &str, default: u64) -> Result<u64, CliError> {
        if self.has(path) {
            self.u64(path)
        } else {
            Ok(default)
        }
    }

    pub fn usize_or(&self, path: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.u64_or(path, default as u64)? as usize)
    }

    pub fn opt_usize(&self, path: &str) -> Result<Option<usize>, CliError> {
        self.lookup(path).map(|_| self.u64(path).map(|v| v as usize)).transpose()
    }

    pub fn str_list(&self, path: &str) -> Result<Vec<String>, CliError> {
        let v = self.required(path)?;
        let items = v.as_array().ok_or_else(|| Self::wrong_type(path, "an array of strings", v))?;
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                item.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Self::wrong_type(&format!("{path}[{i}]"), "a string", item))
            })
            .collect()
    }

    pub fn u8_list(&self, path: &str) -> Result<Vec<u8>, CliError> {
        let v = self.required(path)?;
        let items = v.as_array().ok_or_else(|| Self::wrong_type(path, "an array of integers", v))?;
        items
            .iter()
            .enumerate()
            .map(|(i, item)| match item {
                Value::Integer(n) if (0..=255).contains(n) => Ok(*n as u8),
                _ => Err(Self::wrong_type(&format!("{path}[{i}]"), "a small integer", item)),
            })
            .collect()
    }

    /// Parse a string key through `FromStr`, naming the key on failure.
    pub fn parsed<T: std::str::FromStr>(&self, path: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.str(path)?;
        s.parse().map_err(|e| CliError::Config(format!("key `{path}`: {e}")))
    }

    pub fn parsed_or<T: std::str::FromStr>(&self, path: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if self.has(path) {
            self.parsed(path)
        } else {
            Ok(default)
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        Ok(self.resolve(&self.str(key)?))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Inclusive SNR sweep from `snr.start_db` to `snr.stop_db` in `snr.step_db` steps.
pub fn snr_sweep(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let start = cfg.f64("snr.start_db")?;
    let stop = cfg.f64_or("snr.stop_db", start)?;
    let step = cfg.f64_or("snr.step_db", 1.0)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Config(format!("key `snr.step_db`: must be positive, got {step}")));
    }
    if !(start.is_finite() && stop.is_finite()) || stop < start {
        return Err(CliError::Config(format!(
            "key `snr.stop_db`: sweep from {start} to {stop} dB is empty"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}
