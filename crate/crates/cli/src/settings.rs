//! Flat `key = value` settings files. Blank lines and `#` comments are
//! ignored; keys may use `-` or `_`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{io_err, CliResult, Failure};

pub const KEYS: &[&str] = &[
    "subjects",
    "trials_per_class",
    "snr",
    "seed",
    "line_noise",
    "bandpass",
    "notch",
    "resample",
    "montage",
    "window",
    "offset",
    "subject",
    "task",
    "method",
    "methods",
    "batch",
    "epochs",
    "precision",
    "learning_rate",
    "test_fraction",
    "split_seed",
    "checkpoint_every",
];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("settings line {}: expected key = value", n + 1)))?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(Failure::Usage(format!("settings line {}: unknown key {key:?}", n + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&fs::read_to_string(p).map_err(|e| io_err(p, e))?),
        }
    }

    /// Flag value, else the settings entry, else `None`.
    pub fn text(&self, key: &str, flag: Option<String>) -> Option<String> {
        flag.or_else(|| self.values.get(key).cloned())
    }

    /// Flag value, else the parsed settings entry, else `default`.
    pub fn value<T>(&self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| Failure::Usage(format!("setting {key} = {raw:?}: {e}"))),
        }
    }

    /// Like [`Self::value`] for string flags parsed after resolution.
    pub fn parsed<T>(&self, key: &str, flag: Option<String>, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.text(key, flag) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| Failure::Usage(format!("{key} {raw:?}: {e}"))),
        }
    }
}
