//! Command-line front end: experiment configs, command dispatch and reports.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

use emodetect_core::backend::BackendError;
use emodetect_core::corpora::CorpusError;
use emodetect_core::emotaxon::TaxonomyError;
use emodetect_core::evalkit::EvalError;
use emodetect_core::trainer::TrainerError;
use emodetect_llmzero::ZeroShotError;

pub use commands::{dispatch, Cli, Command};
pub use config::ExperimentConfig;
pub use report::{emit_report, ReportBundle};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("invalid config at {field}: {message}")]
    Config { field: String, message: String },
    #[error("cannot write {path}: {source}")]
    OutputUnwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Some work finished and was saved, some did not.
    #[error("partial completion: {0}")]
    Partial(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) | CliError::Config { .. } => 1,
            CliError::Partial(_) => 3,
            CliError::OutputUnwritable { .. } | CliError::Internal(_) => 2,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Internal(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<TaxonomyError> for CliError {
    fn from(e: TaxonomyError) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Io { .. } => CliError::Internal(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<TrainerError> for CliError {
    fn from(e: TrainerError) -> Self {
        match e {
            TrainerError::Io { .. } => CliError::Internal(e.to_string()),
            TrainerError::Backend(b) => b.into(),
            TrainerError::Corpus(c) => c.into(),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<ZeroShotError> for CliError {
    fn from(e: ZeroShotError) -> Self {
        match e {
            ZeroShotError::TransportFailure { .. } => CliError::Partial(e.to_string()),
            ZeroShotError::Cache { .. } => CliError::Internal(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}
