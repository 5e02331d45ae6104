//! Multi-stage fine-tuning under the seeded multi-run protocol.

mod config;
mod optim;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    needs_head_swap, AdamConfig, Profile, ProtocolConfig, SelectionMetric, StageConfig, StageSpec,
    PAPER_DATA_SEED_BASES, PAPER_MODEL_SEEDS,
};
pub use optim::{linear_schedule, AdamW};
pub use run::{
    evaluate_model, run_pipeline, run_protocol, run_stage, EpochRecord, PipelineEnv, PipelineOutcome, ProtocolEnv,
    RunLog, RunResult, RunSetResult, RunStatus, StageContext, StageOutcome, StageRecord, MANIFEST_FILE, SPLIT_FILE,
};

use crate::backend::BackendError;
use crate::corpora::CorpusError;
use crate::evalkit::{compare_models, ComparisonTable, EvalError};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("non-finite loss in epoch {epoch} at optimizer step {step} (micro-batch {batch})")]
    NonFiniteLoss { epoch: u32, step: usize, batch: usize },
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("stage {index} ({name}): {source}")]
    Stage {
        index: usize,
        name: String,
        #[source]
        source: Box<TrainerError>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Head-to-head table of two protocols' test results; `b` is the candidate.
pub fn compare_run_sets(a: &RunSetResult, b: &RunSetResult) -> Result<ComparisonTable, TrainerError> {
    if a.per_run.len() != b.per_run.len() || !a.all_completed() || !b.all_completed() {
        return Err(EvalError::RunCountMismatch {
            a: a.completed,
            b: b.completed,
        }
        .into());
    }
    Ok(compare_models(&a.protocol, &a.test_reports(), &b.protocol, &b.test_reports())?)
}
