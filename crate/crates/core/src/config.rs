//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; keys are
//! [`PipelineConfig`] field names.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

/// Key-value pairs in file order.
pub fn parse_pairs(text: &str) -> std::result::Result<Vec<(String, String)>, (usize, String)> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| (n + 1, format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err((n + 1, "empty key".into()));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Applies a configuration file on top of `config`.
pub fn load_into(config: &mut PipelineConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let parse_err = |message: String| Error::Parse {
        what: "configuration",
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pairs = parse_pairs(&text).map_err(|(line, m)| parse_err(format!("line {line}: {m}")))?;
    for (key, value) in pairs {
        config
            .set(&key, &value)
            .map_err(|e| parse_err(e.to_string()))?;
    }
    Ok(())
}
