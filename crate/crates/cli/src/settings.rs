//! Flat `key = value` configuration files. Command-line flags win over file
//! entries, which win over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

/// `base_width` and `base-width` name the same key.
fn canonical(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`, got `{line}`", n + 1))?;
            let key = canonical(k);
            if key.is_empty() {
                bail!("config line {}: empty key", n + 1);
            }
            values.insert(key, v.trim().trim_matches('"').to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&canonical(key)).map(String::as_str)
    }

    /// Flag value if given, else the config entry, else `None`.
    pub fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key `{key}`: cannot parse `{v}`: {e}")))
            .transpose()
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    /// Like [`Settings::get`] for switches: a set flag wins, otherwise the
    /// config may turn the switch on with `true`.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get(None, key, false)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let s = Settings::parse("# comment\nepochs = 7\nbase_width=4\nname = \"x\"\n").unwrap();
        assert_eq!(s.get::<usize>(None, "epochs", 1).unwrap(), 7);
        assert_eq!(s.get(Some(3usize), "epochs", 1).unwrap(), 3);
        assert_eq!(s.get::<usize>(None, "base-width", 16).unwrap(), 4);
        assert_eq!(s.get::<usize>(None, "depth", 2).unwrap(), 2);
        assert_eq!(s.raw("name"), Some("x"));
        assert!(s.get::<f64>(None, "name", 0.0).is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Settings::parse("epochs 7").is_err());
        assert!(Settings::parse(" = 7").is_err());
    }
}
