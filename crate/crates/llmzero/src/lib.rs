//! Zero-shot authorship detection by prompting a chat model.

mod cache;
mod client;
mod prompt;
mod run;
mod verdict;

use std::path::PathBuf;

use thiserror::Error;

use emodetect_core::evalkit::EvalError;

pub use cache::{cache_key, prompt_digest, CacheEntry, ResponseCache};
pub use client::{
    CallError, ChatBackend, ChatRequest, ChatResponse, ClientConfig, HttpBackend, MockBackend, MockScript,
    ScriptedReply,
};
pub use prompt::{build_prompt, DetectionPrompt, PREAMBLE};
pub use run::{run_zeroshot, score_verdicts, scored_label, DocVerdict, ZeroShotOutcome, ZeroShotReport};
pub use verdict::{parse_verdict, Verdict, VerdictValue};

#[derive(Debug, Error)]
pub enum ZeroShotError {
    #[error("article text is empty")]
    EmptyArticle,
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("zero-shot detection needs a binary-authorship corpus, got {0}")]
    NotBinary(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("authentication failed (HTTP {status})")]
    AuthFailure { status: u16 },
    #[error("request for {doc_id} failed after {attempts} attempt(s): {message} ({completed} documents done and cached)")]
    TransportFailure {
        doc_id: String,
        attempts: u32,
        completed: usize,
        message: String,
    },
    #[error("cache write failed at {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mock script: {0}")]
    Script(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
