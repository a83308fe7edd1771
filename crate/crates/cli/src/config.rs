//! `key = value` configuration files.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored.
//! Keys are the long flag names with `-` or `_` (for example `deadline_us`,
//! `rollout_percent`, `epochs`). Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "format",
    "socket",
    "deadline_us",
    "model",
    "k",
    "policies",
    "capacities",
    "mode",
    "rollout_percent",
    "breaker_threshold",
    "breaker_cooldown_s",
    "requests",
    // training
    "gamma",
    "epsilon",
    "batch",
    "lr",
    "epochs",
    "target_sync",
    "iterations",
    "replay_capacity",
    "ablate",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{}`", i + 1, k.trim())));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse().map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    /// `flag`, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let c = Config::parse("# lab\nseed = 7\ndeadline-us=250  # tight\n\n").unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get::<u64>("deadline_us").unwrap(), Some(250));
        assert_eq!(c.pick(Some(9u64), "seed", 0).unwrap(), 9);
        assert_eq!(c.pick(None, "epochs", 10usize).unwrap(), 10);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(matches!(Config::parse("colour = red"), Err(CliError::Usage(_))));
        assert!(matches!(Config::parse("seed"), Err(CliError::Usage(_))));
        assert!(matches!(Config::parse("seed = x").unwrap().get::<u64>("seed"), Err(CliError::Usage(_))));
    }
}
