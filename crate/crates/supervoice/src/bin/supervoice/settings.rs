//! Layered option resolution: flag, then `SUPERVOICE_<KEY>` environment
//! variable, then a `key=value` config file, then the caller's default.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

const DEFAULT_PATH: &str = "supervoice.conf";

pub struct Settings {
    file: HashMap<String, String>,
}

impl Settings {
    /// Reads the config file. An explicitly given path must exist and
    /// parse; the default path is allowed to be absent.
    pub fn load(explicit: Option<&Path>) -> Result<Settings, String> {
        let path = explicit.unwrap_or(Path::new(DEFAULT_PATH));
        if explicit.is_none() && !path.exists() {
            return Ok(Settings {
                file: HashMap::new(),
            });
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("reading {}: {e}", path.display()))?;
        let mut file = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "{} line {}: expected key=value, got {:?}",
                    path.display(),
                    lineno + 1,
                    raw
                ));
            };
            file.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Settings { file })
    }

    /// Resolves one option through the layers. `flag` wins outright; a set
    /// but malformed environment variable or file entry is an error rather
    /// than a silent fallback.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        let env_key = format!("SUPERVOICE_{}", key.to_uppercase());
        if let Ok(raw) = std::env::var(&env_key) {
            return raw
                .parse()
                .map(Some)
                .map_err(|e| format!("{env_key}={raw:?}: {e}"));
        }
        if let Some(raw) = self.file.get(key) {
            return raw
                .parse()
                .map(Some)
                .map_err(|e| format!("config key {key}={raw:?}: {e}"));
        }
        Ok(None)
    }
}
