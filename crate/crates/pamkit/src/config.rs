//! Plain-text run configuration: one `key = value` pair per line.
//!
//! Blank lines and lines starting with `#` are ignored. Keys and
//! values are trimmed; the first `=` splits them, so values may
//! contain `=` freely. Callers layer precedence on top: a
//! command-line flag overrides a config value, which overrides the
//! built-in default.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("config line {line}: key '{key}' was already set")]
    DuplicateKey { key: String, line: usize },
    #[error("failed to read config {path}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Parses `key = value` lines into a sorted map.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::MalformedLine {
                line,
                reason: format!("expected 'key = value', got {trimmed:?}"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(ConfigError::MalformedLine {
                line,
                reason: "empty key before '='".into(),
            });
        }
        if out.contains_key(key) {
            return Err(ConfigError::DuplicateKey {
                key: key.to_string(),
                line,
            });
        }
        out.insert(key.to_string(), value.to_string());
    }
    Ok(out)
}

/// Reads and parses a config file.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}
