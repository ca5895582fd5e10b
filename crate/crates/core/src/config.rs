//! Flat sectioned `key = value` experiment configuration.
//!
//! Sections are `[name]` headers; `#` starts a comment. Every key present in
//! the file must belong to the schema of the command consuming it — unknown
//! keys are hard errors, which catches typos in experiment definitions
//! before any computation starts.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    hash: String,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RawConfig::parse(&text)?;
        cfg.hash = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                )));
            };
            if current.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key {key:?} appears before any [section]",
                    lineno + 1
                )));
            }
            let key = key.trim().to_string();
            let section = sections.get_mut(&current).unwrap();
            if section.contains_key(&key) {
                return Err(Error::Config(format!(
                    "duplicate key `{key}` in section [{current}]"
                )));
            }
            section.insert(key, value.trim().to_string());
        }
        Ok(RawConfig { sections, hash: format!("{:x}", Sha256::digest(text.as_bytes())) })
    }

    /// SHA-256 of the raw file text.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Reject any key the command schema does not know about.
    pub fn validate_keys(&self, schema: &[(&str, &[&str])]) -> Result<()> {
        for (section, keys) in &self.sections {
            let Some((_, allowed)) = schema.iter().find(|(s, _)| s == section) else {
                return Err(Error::Config(format!("unknown section [{section}]")));
            };
            for key in keys.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown key `{key}` in section [{section}]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(|s| s.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.raw(section, key).ok_or_else(|| {
            Error::Config(format!("missing required key `{key}` in section [{section}]"))
        })
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<f64> {
        self.require(section, key)?
            .parse()
            .map_err(|e| Error::Config(format!("[{section}] {key}: not a number ({e})")))
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("[{section}] {key}: not a number ({e})"))),
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("[{section}] {key}: not a count ({e})"))),
        }
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("[{section}] {key}: not an integer ({e})"))),
        }
    }

    pub fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.raw(section, key).unwrap_or(default)
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>> {
        self.require(section, key)?
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| {
                    Error::Config(format!("[{section}] {key}: bad entry {tok:?} ({e})"))
                })
            })
            .collect()
    }

    pub fn str_list(&self, section: &str, key: &str, default: &[&str]) -> Vec<String> {
        match self.raw(section, key) {
            None => default.iter().map(|s| s.to_string()).collect(),
            Some(v) => v.split(',').map(|s| s.trim().to_string()).collect(),
        }
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.raw(section, key).is_some()
    }
}
