//! Pipeline orchestration for the representation-diversity toolkit:
//! ingest, sweep, cluster, project, flow, distill, and corpus metrics, with
//! a declarative config file and hashed, reproducible run records.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod record;

use std::path::PathBuf;

/// Errors split by exit code: validation problems exit 2, stage failures
/// exit 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },

    #[error(transparent)]
    Core(#[from] repdiv::Error),

    #[error("io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } | CliError::Core(_) | CliError::Io { .. } => 3,
        }
    }
}

/// Timestamp for emitted manifests: `SOURCE_DATE_EPOCH` when set, otherwise
/// 0, so identical runs produce identical bytes.
pub fn created_at() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}
