//! Command implementations behind the `k2t` binary.
//!
//! Each command validates its configuration completely before reading
//! inputs, and writes outputs only after all work has succeeded.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{
    cmd_evaluate, cmd_index, cmd_ingest, cmd_transform, IndexStats, Selection, TransformRecord,
};
pub use config::{ParaphraserSpec, RunConfig, ScorerSpec, CONFIG_ENV};

/// Failure of a command, classified by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("{0}")]
    Scorer(String),
}

impl CliError {
    pub fn data(
        context: impl Into<String>,
        source: impl Into<Box<dyn std::error::Error + Send + Sync>>,
    ) -> Self {
        CliError::Data {
            context: context.into(),
            source: source.into(),
        }
    }

    /// 1 usage or config, 2 data, 3 scorer or protocol.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Scorer(_) => 3,
        }
    }
}
