use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. The CLI maps `Config` to exit code 1 and
/// `Blowup` to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error("{function}: argument {value} outside the domain ({expected})")]
    Domain {
        function: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{0} is not defined for this diffusion law")]
    UnsupportedFunctional(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical blowup at t = {t:e}: {detail}")]
    Blowup { t: f64, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Error::Blowup { .. })
    }
}

/// A configuration problem, optionally pinned to a key path and source line.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{}{message}", key_prefix(.key), line_prefix(.line))]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

fn key_prefix(key: &Option<String>) -> String {
    key.as_ref().map(|k| format!("`{k}`: ")).unwrap_or_default()
}

fn line_prefix(line: &Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            key: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn at_key(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: Some(key.into()),
            line: None,
            message: message.into(),
        }
    }

    pub fn with_line(mut self, line: Option<usize>) -> Self {
        self.line = line;
        self
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Config(ConfigError::new(message)))
}
