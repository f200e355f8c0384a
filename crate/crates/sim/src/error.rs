//! Error type shared by the harness, with the process exit code it maps to.

use std::path::PathBuf;

use thiserror::Error;

/// Exit code for invalid configuration or input files.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for failures while running a valid configuration.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid scenario or input file. `line` is 1-based when known.
    #[error("{}", location(.path, *.line, .message))]
    Config {
        path: Option<PathBuf>,
        line: Option<usize>,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

fn location(path: &Option<PathBuf>, line: Option<usize>, message: &str) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!("{}:{l}: {message}", p.display()),
        (Some(p), None) => format!("{}: {message}", p.display()),
        (None, Some(l)) => format!("line {l}: {message}"),
        (None, None) => message.to_string(),
    }
}

impl SimError {
    pub fn config(message: impl Into<String>) -> Self {
        SimError::Config {
            path: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn config_at(line: Option<usize>, message: impl Into<String>) -> Self {
        SimError::Config {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attach a file path to a config error that lacks one.
    pub fn in_file(self, file: &std::path::Path) -> Self {
        match self {
            SimError::Config {
                path: None,
                line,
                message,
            } => SimError::Config {
                path: Some(file.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config { .. } => EXIT_CONFIG,
            SimError::Io { .. } | SimError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
