//! TOML experiment files.

use std::path::Path;

use crate::error::{ConfigError, Error, Result};
use crate::scenarios::ScenarioConfig;

const REQUIRED: &[&str] = &[
    "name",
    "dim",
    "omega",
    "domain",
    "dx",
    "t_final",
    "observe_every",
    "setting",
    "diffusion",
    "potential",
    "initial",
];

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line on which a top-level key is assigned or its table opens.
fn key_line(src: &str, key: &str) -> Option<usize> {
    let root = key.split('.').next().unwrap_or(key);
    src.lines().position(|l| {
        let t = l.trim_start();
        let bare = t.strip_prefix(root).map(|r| r.trim_start().starts_with('='));
        let table = [format!("[{root}]"), format!("[{root}."), format!("[[{root}]]")]
            .iter()
            .any(|h| t.starts_with(h.as_str()));
        bare == Some(true) || table
    })
    .map(|i| i + 1)
}

/// Parses a configuration without validating it.
pub fn parse(src: &str) -> Result<ScenarioConfig> {
    if src.trim().is_empty() {
        return Err(Error::Config(ConfigError::new(format!(
            "empty configuration; required keys: {}",
            REQUIRED.join(", ")
        ))));
    }
    toml::from_str(src).map_err(|e| {
        let line = e.span().map(|s| line_of(src, s.start));
        Error::Config(ConfigError::new(e.message().trim().to_string()).with_line(line))
    })
}

/// Parses and validates; validation errors carry the line of the offending key.
pub fn from_toml(src: &str) -> Result<ScenarioConfig> {
    let cfg = parse(src)?;
    cfg.validate().map_err(|e| match e {
        Error::Config(c) => {
            let line = c.line.or_else(|| c.key.as_deref().and_then(|k| key_line(src, k)));
            Error::Config(c.with_line(line))
        }
        other => other,
    })?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ScenarioConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_toml(&src)
}

pub fn to_toml(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(ConfigError::new(e.to_string())))
}
