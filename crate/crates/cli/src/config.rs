//! Configuration files and flag/file/default resolution.
//!
//! A configuration file is flat `key = value` text: one setting per line,
//! `#` starts a full-line comment, and underscores in keys are
//! interchangeable with dashes. Every key corresponds to a long flag;
//! when both are given, the flag wins. Unknown or duplicated keys are
//! rejected so that typos fail loudly instead of silently running with
//! defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key a configuration file may set.
pub const KNOWN_KEYS: &[&str] = &[
    // search engine
    "d",
    "protected",
    "cmax",
    "kmax",
    "p-and",
    "p-not",
    "rho-min",
    "fresh-leaf-prob",
    "tmax",
    "explore-iters",
    "final-iters",
    "mfin",
    "chains",
    "seed",
    "log-penalty",
    "measure",
    "retain-coefficients",
    "candidate-retries",
    // sampler tuning
    "jump-prob",
    "min-flip",
    "max-flip",
    "min-jump",
    "max-jump",
    "rand-flip-prob",
    "greedy-max-steps",
    // reporting
    "report-level",
    "aggregation",
    // data generation and studies
    "scenario",
    "generator",
    "n",
    "p",
    "alphad",
    "margprob",
    "permute",
    "chromosomes",
    "markers-per-chromosome",
    "noise-sd",
    "replicates",
    "window",
    // input/output
    "data",
    "response",
    "fixed",
    "out",
    "truth-out",
    "positions-out",
    "report",
    "truth",
    "positions",
    "dump-registry",
    "train",
    "test",
    "method",
    "num-best",
    "baseline",
];

/// Parsed `key = value` settings from a configuration file.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// Read and validate a configuration file.
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        FileConfig::parse(&text, &path.display().to_string())
    }

    fn parse(text: &str, origin: &str) -> Result<FileConfig, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{origin}:{}: expected 'key = value', got {line:?}",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_ascii_lowercase().replace('_', "-");
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: unknown config key {key:?}",
                    lineno + 1
                )));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: duplicate config key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(FileConfig { values })
    }

    /// The raw string for `key`, if the file set it.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The value for `key` parsed as `T`, if the file set it.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Usage(format!("config key {key:?}: invalid value {raw:?} ({e})"))
            }),
        }
    }
}

/// Flag value if present, else the file value, else the default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T, CliError>
where
    T::Err: Display,
{
    Ok(flag.or(file.get(key)?).unwrap_or(default))
}

/// Flag value if present, else the file value, else `None`.
pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<Option<T>, CliError>
where
    T::Err: Display,
{
    Ok(flag.or(file.get(key)?))
}

/// Echo resolved settings to stderr, one `key=value` line each, so a run
/// can be reproduced from its log alone.
pub fn echo_resolved(command: &str, entries: &[(&str, String)]) {
    eprintln!("# {command}: resolved configuration");
    for (key, value) in entries {
        eprintln!("{key}={value}");
    }
}
