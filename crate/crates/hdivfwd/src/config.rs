//! Flat `key = value` configuration with `[section]` prefixes.
//!
//! File keys inside a section become `section.key`. Command-line flags are
//! merged on top and win over file values. The sorted key set hashes into a
//! short provenance token embedded in every output file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Config::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Validation(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Validation(format!("config line {}: empty key", lineno + 1)));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            values.insert(full, value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    /// Insert or override one value (flags win over file values).
    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Validation(format!("bad value '{raw}' for key '{key}'"))),
        }
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get_parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated list value.
    pub fn get_list(&self, key: &str) -> Option<Vec<String>> {
        self.values
            .get(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    /// FNV-1a hash of the sorted key/value pairs, as a provenance token.
    ///
    /// Execution-environment keys (thread count, output location, config file
    /// path) are excluded: they change where and how fast results are
    /// produced, never what they are, and the same run must hash identically
    /// regardless of them.
    pub fn hash(&self) -> String {
        const ENV_KEYS: [&str; 3] = ["threads", "out", "config"];
        let mut h: u64 = 0xcbf29ce484222325;
        for (k, v) in &self.values {
            if ENV_KEYS.contains(&k.as_str()) {
                continue;
            }
            for b in k.bytes().chain([b'='].into_iter()).chain(v.bytes()).chain([b'\n']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_sections_and_comments() {
        let c = Config::parse(
            "spacing = 2.0\n# comment\n[solver]\nouter_tol = 1e-8 # inline\n\n[mesh]\ncentering=corner\n",
        )
        .unwrap();
        assert_eq!(c.get("spacing"), Some("2.0"));
        assert_eq!(c.get("solver.outer_tol"), Some("1e-8"));
        assert_eq!(c.get("mesh.centering"), Some("corner"));
        assert_eq!(c.get_or("solver.outer_tol", 0.0).unwrap(), 1e-8);
        assert_eq!(c.get_or("missing", 7usize).unwrap(), 7);
    }

    #[test]
    fn flags_override_file() {
        let mut c = Config::parse("spacing = 2.0").unwrap();
        c.set("spacing", "4.0");
        assert_eq!(c.get_or("spacing", 0.0).unwrap(), 4.0);
    }

    #[test]
    fn malformed_rejected() {
        assert!(Config::parse("just a line").is_err());
        assert!(Config::parse("= nokey").is_err());
        assert!(Config::parse("bad_number = abc").unwrap().get_or("bad_number", 1.0).is_err());
    }

    #[test]
    fn hash_stable_and_sensitive() {
        let a = Config::parse("x = 1\ny = 2").unwrap();
        let b = Config::parse("y = 2\nx = 1").unwrap();
        let c = Config::parse("x = 1\ny = 3").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_execution_environment_keys() {
        let mut a = Config::parse("mesh.spacing = 2").unwrap();
        let mut b = Config::parse("mesh.spacing = 2").unwrap();
        a.set("threads", "1");
        a.set("out", "run-a");
        b.set("threads", "4");
        b.set("out", "run-b");
        b.set("config", "sweep.toml");
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn list_values() {
        let c = Config::parse("methods = mixed-projected, cg-pi").unwrap();
        assert_eq!(
            c.get_list("methods").unwrap(),
            vec!["mixed-projected".to_string(), "cg-pi".to_string()]
        );
    }
}
