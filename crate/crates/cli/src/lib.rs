//! Experiment driver: one command per invocation, every output listed in a manifest.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

use serde::Serialize;

pub use commands::{run, Command};
pub use config::{load_config, RunConfig};
pub use report::Manifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ris_forge::Error),
    #[error("output directory `{0}` holds files this tool did not write")]
    DirtyOutput(String),
}

impl CliError {
    pub(crate) fn config(path: &str, e: impl fmt::Display) -> Self {
        CliError::Config {
            path: path.to_string(),
            message: e.to_string(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Model(_) => "model",
            CliError::DirtyOutput(_) => "output",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
            },
        })
        .expect("error serializes")
    }
}
