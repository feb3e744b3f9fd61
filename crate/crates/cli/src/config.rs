//! Layered option resolution: command-line flags override environment
//! variables (`FROSTMAN_<KEY>`), which override `key=value` lines from an
//! optional config file, which override built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const ENV_PREFIX: &str = "FROSTMAN_";

#[derive(Debug, Default, Clone)]
pub struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (i, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    bail!("config line {} is not key=value: {raw:?}", i + 1);
                };
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self { file })
    }

    fn raw(&self, key: &str) -> Option<String> {
        let env_key: String = key
            .chars()
            .map(|c| if c == '-' { '_' } else { c.to_ascii_uppercase() })
            .collect();
        std::env::var(format!("{ENV_PREFIX}{env_key}"))
            .ok()
            .or_else(|| self.file.get(key).cloned())
    }

    /// Flag value if given, else environment, else file, else default.
    pub fn resolve<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v.clone());
        }
        match self.raw(key) {
            Some(text) => text
                .parse()
                .map_err(|e| anyhow::anyhow!("bad value for {key}: {text:?} ({e})")),
            None => Ok(default),
        }
    }

    /// As `resolve` but without a default.
    pub fn resolve_opt<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.raw(key) {
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("bad value for {key}: {text:?} ({e})")),
            None => Ok(None),
        }
    }
}
