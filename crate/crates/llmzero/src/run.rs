use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use emodetect_core::corpora::{Authorship, Corpus, Label, Schema};
use emodetect_core::evalkit::{confusion, metrics_for, BinaryCounts, ConfusionCounts, MetricsReport};
use emodetect_core::seed::{derive_seed, rng_from_seed};

use crate::cache::{prompt_digest, CacheEntry, ResponseCache};
use crate::client::{CallError, ChatBackend, ChatRequest, ClientConfig};
use crate::prompt::build_prompt;
use crate::verdict::{parse_verdict, Verdict, VerdictValue};
use crate::ZeroShotError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVerdict {
    pub doc_id: String,
    pub gold: Authorship,
    pub verdict: Verdict,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotReport {
    pub model_id: String,
    pub metrics: MetricsReport,
    pub counts: BinaryCounts,
    pub n: usize,
    pub parsed: usize,
    /// Responses naming both or neither class; scored as wrong predictions.
    pub unparseable: usize,
    pub network_calls: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotOutcome {
    pub verdicts: Vec<DocVerdict>,
    pub report: ZeroShotReport,
}

/// Label used for scoring. An unparseable verdict takes the class opposite
/// to the gold label, so it always counts as a mistake.
pub fn scored_label(value: VerdictValue, gold: Authorship) -> Authorship {
    match value {
        VerdictValue::Human => Authorship::Human,
        VerdictValue::Synthetic => Authorship::Synthetic,
        VerdictValue::Unparseable => match gold {
            Authorship::Human => Authorship::Synthetic,
            Authorship::Synthetic => Authorship::Human,
        },
    }
}

/// Scores a list of verdicts against their gold labels (positive = synthetic).
pub fn score_verdicts(model_id: &str, verdicts: &[DocVerdict]) -> Result<ZeroShotReport, ZeroShotError> {
    let golds: Vec<Label> = verdicts.iter().map(|v| Label::Authorship(v.gold)).collect();
    let preds: Vec<Label> = verdicts
        .iter()
        .map(|v| Label::Authorship(scored_label(v.verdict.value, v.gold)))
        .collect();
    let counts = confusion(&preds, &golds, Schema::BinaryAuthorship.positive_label())?;
    let metrics = metrics_for(&counts)?;
    let ConfusionCounts::Binary { counts, .. } = counts else {
        unreachable!("binary schema yields binary counts")
    };
    let unparseable = verdicts
        .iter()
        .filter(|v| v.verdict.value == VerdictValue::Unparseable)
        .count();
    Ok(ZeroShotReport {
        model_id: model_id.to_string(),
        metrics,
        counts,
        n: verdicts.len(),
        parsed: verdicts.len() - unparseable,
        unparseable,
        network_calls: 0,
        cache_hits: verdicts.iter().filter(|v| v.cached).count(),
    })
}

struct Pacer {
    min_interval: Duration,
    last: Option<Instant>,
}

impl Pacer {
    fn wait(&mut self) {
        if let Some(last) = self.last {
            let elapsed = last.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        self.last = Some(Instant::now());
    }
}

/// Queries the backend once per document, in corpus order. Responses already
/// in the cache are reused without touching the backend; fresh ones are
/// written to the cache as soon as they arrive, so an interrupted run resumes
/// where it stopped.
pub fn run_zeroshot(
    corpus: &Corpus,
    config: &ClientConfig,
    backend: &mut dyn ChatBackend,
) -> Result<ZeroShotOutcome, ZeroShotError> {
    if corpus.schema != Schema::BinaryAuthorship {
        return Err(ZeroShotError::NotBinary(corpus.schema.to_string()));
    }
    if corpus.docs.is_empty() {
        return Err(ZeroShotError::EmptyCorpus);
    }
    // build every prompt up front so a bad article fails before any request
    let prompts = corpus
        .docs
        .iter()
        .map(|d| build_prompt(&d.text).map(|p| p.text()))
        .collect::<Result<Vec<_>, _>>()?;

    let model_id = backend.model_id().to_string();
    let cache = ResponseCache::new(&config.cache_dir);
    let mut pacer = Pacer {
        min_interval: Duration::from_millis(config.min_interval_ms),
        last: None,
    };
    let mut verdicts = Vec::with_capacity(corpus.docs.len());
    let mut network_calls = 0usize;

    for (i, (doc, prompt)) in corpus.docs.iter().zip(&prompts).enumerate() {
        let gold = doc.label.authorship().expect("binary corpus holds authorship labels");
        if let Some(hit) = cache.get(&model_id, prompt) {
            debug!("cache hit for {}", doc.id);
            verdicts.push(DocVerdict {
                doc_id: doc.id.clone(),
                gold,
                verdict: Verdict {
                    value: parse_verdict(&hit.response),
                    raw_response: hit.response,
                    model_id: hit.model_id,
                    model_version: hit.model_version,
                    timestamp: hit.timestamp,
                },
                cached: true,
            });
            continue;
        }

        let request = ChatRequest {
            doc_id: doc.id.clone(),
            prompt: prompt.clone(),
        };
        let mut rng = rng_from_seed(derive_seed(config.backoff_seed, &[i as u64]));
        let mut attempt = 0u32;
        let response = loop {
            pacer.wait();
            attempt += 1;
            network_calls += 1;
            match backend.complete(&request) {
                Ok(r) => break r,
                Err(CallError::Auth(status)) => return Err(ZeroShotError::AuthFailure { status }),
                Err(CallError::Retryable(msg)) if attempt <= config.max_retries => {
                    let factor = 1.0 + rng.random::<f64>();
                    let delay = config.backoff_base_ms as f64 * 2f64.powi(attempt as i32 - 1) * factor;
                    warn!("{}: attempt {attempt} failed ({msg}); retrying in {delay:.0} ms", doc.id);
                    std::thread::sleep(Duration::from_millis(delay as u64));
                }
                Err(e) => {
                    return Err(ZeroShotError::TransportFailure {
                        doc_id: doc.id.clone(),
                        attempts: attempt,
                        completed: verdicts.len(),
                        message: e.to_string(),
                    })
                }
            }
        };

        let timestamp = chrono::Utc::now().to_rfc3339();
        cache.put(&CacheEntry {
            model_id: model_id.clone(),
            prompt_digest: prompt_digest(prompt),
            prompt: prompt.clone(),
            response: response.content.clone(),
            model_version: response.model_version.clone(),
            timestamp: timestamp.clone(),
        })?;
        verdicts.push(DocVerdict {
            doc_id: doc.id.clone(),
            gold,
            verdict: Verdict {
                value: parse_verdict(&response.content),
                raw_response: response.content,
                model_id: model_id.clone(),
                model_version: response.model_version,
                timestamp,
            },
            cached: false,
        });
    }

    let mut report = score_verdicts(&model_id, &verdicts)?;
    report.network_calls = network_calls;
    info!(
        "zero-shot {}: {} docs, {} unparseable, {} cache hits, {} calls",
        model_id, report.n, report.unparseable, report.cache_hits, network_calls
    );
    Ok(ZeroShotOutcome { verdicts, report })
}
