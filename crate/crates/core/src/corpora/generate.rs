//! Synthetic counterpart generation.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Authorship, Corpus, CorpusError, Doc, Label, Schema};
use crate::evalkit::split_sentences;
use crate::seed::{derive_seed, rng_from_seed};

const BUNDLED_GENERATOR_TEXT: &str = include_str!("../../data/generator_corpus.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub top_p: f64,
    pub max_new_tokens: usize,
    pub use_metadata_prompt: bool,
    pub generator_id: String,
    /// Base seed; each document samples with a seed derived from it.
    pub seed: i64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            top_p: 0.95,
            max_new_tokens: 40,
            use_metadata_prompt: true,
            generator_id: "markov-bigram-v1".into(),
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(CorpusError::Unknown {
                kind: "top_p (must lie in (0,1])",
                value: self.top_p.to_string(),
            });
        }
        if self.max_new_tokens == 0 {
            return Err(CorpusError::Unknown {
                kind: "max_new_tokens (must be positive)",
                value: "0".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("generation failed: {0}")]
pub struct GenerationError(pub String);

/// Any text generator that continues a prompt.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, prompt: &str, cfg: &GenerationConfig, seed: i64) -> Result<String, GenerationError>;
}

/// Picks an index from `probs` by nucleus sampling: the smallest set of most
/// probable entries whose mass reaches `top_p`, renormalized.
pub fn nucleus_sample<R: Rng + ?Sized>(probs: &[f64], top_p: f64, rng: &mut R) -> Option<usize> {
    if probs.is_empty() {
        return None;
    }
    let total: f64 = probs.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for &i in &order {
        kept.push(i);
        mass += probs[i] / total;
        if mass >= top_p - 1e-12 {
            break;
        }
    }
    let kept_mass: f64 = kept.iter().map(|&i| probs[i]).sum();
    let mut r = rng.random::<f64>() * kept_mass;
    for &i in &kept {
        r -= probs[i];
        if r <= 0.0 {
            return Some(i);
        }
    }
    kept.last().copied()
}

const START: &str = "<s>";
const END: &str = "</s>";

/// Word-bigram causal generator with nucleus sampling.
#[derive(Debug, Clone)]
pub struct MarkovGenerator {
    transitions: BTreeMap<String, Vec<(String, u32)>>,
    min_words: usize,
}

impl MarkovGenerator {
    /// Trains on newline-separated sentences.
    pub fn from_text(text: &str) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut prev = START.to_string();
            for word in line.split_whitespace().chain(std::iter::once(END)) {
                *counts
                    .entry(prev.clone())
                    .or_default()
                    .entry(word.to_string())
                    .or_insert(0) += 1;
                prev = word.to_string();
            }
        }
        let transitions = counts
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect();
        Self {
            transitions,
            min_words: 8,
        }
    }

    pub fn bundled() -> Self {
        Self::from_text(BUNDLED_GENERATOR_TEXT)
    }

    fn next(&self, current: &str, top_p: f64, rng: &mut impl Rng) -> String {
        let options = self
            .transitions
            .get(current)
            .or_else(|| self.transitions.get(START))
            .expect("trained generator has a start state");
        let probs: Vec<f64> = options.iter().map(|(_, c)| *c as f64).collect();
        let i = nucleus_sample(&probs, top_p, rng).expect("non-empty options");
        options[i].0.clone()
    }
}

impl TextGenerator for MarkovGenerator {
    fn generate(&self, prompt: &str, cfg: &GenerationConfig, seed: i64) -> Result<String, GenerationError> {
        if self.transitions.is_empty() {
            return Err(GenerationError("generator has no training text".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut current = prompt
            .split_whitespace()
            .last()
            .filter(|w| self.transitions.contains_key(*w))
            .unwrap_or(START)
            .to_string();
        let mut words: Vec<String> = Vec::new();
        while words.len() < cfg.max_new_tokens {
            let next = self.next(&current, cfg.top_p, &mut rng);
            if next == END {
                if words.len() >= self.min_words {
                    break;
                }
                current = START.to_string();
                continue;
            }
            words.push(next.clone());
            current = next;
        }
        Ok(words.join(" "))
    }
}

/// Prompt for a human article: metadata lines when enabled, then the headline.
pub fn build_prompt(doc: &Doc, use_metadata: bool) -> String {
    let headline = doc
        .meta
        .get("headline")
        .cloned()
        .or_else(|| split_sentences(&doc.text).into_iter().next().map(str::to_string))
        .unwrap_or_else(|| doc.text.clone());
    let mut prompt = String::new();
    if use_metadata {
        for key in ["domain", "date", "authors"] {
            if let Some(v) = doc.meta.get(key) {
                prompt.push_str(&format!("{key}: {v}\n"));
            }
        }
        prompt.push_str("headline: ");
    }
    prompt.push_str(&headline);
    prompt
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisFailure {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub corpus: Corpus,
    pub failures: Vec<SynthesisFailure>,
}

/// Generates one synthetic document per human document and returns the
/// union. Generator failures are reported, not fatal. Up to `width` calls
/// run concurrently; output order follows input order.
pub fn synthesize_counterparts(
    humans: &Corpus,
    generator: &dyn TextGenerator,
    cfg: &GenerationConfig,
    width: usize,
) -> Result<SynthesisOutput, CorpusError> {
    cfg.validate()?;
    if humans.schema != Schema::BinaryAuthorship {
        return Err(CorpusError::SchemaMismatch {
            expected: Schema::BinaryAuthorship.to_string(),
            found: humans.schema.to_string(),
        });
    }
    if let Some(d) = humans
        .docs
        .iter()
        .find(|d| d.label != Label::Authorship(Authorship::Human))
    {
        return Err(CorpusError::SchemaMismatch {
            expected: "human-only corpus".into(),
            found: format!("{} document {:?}", d.label, d.id),
        });
    }

    let job = |(i, doc): (usize, &Doc)| {
        let prompt = build_prompt(doc, cfg.use_metadata_prompt);
        let seed = derive_seed(cfg.seed, &[i as u64]);
        let result = generator
            .generate(&prompt, cfg, seed)
            .and_then(|t| {
                if t.trim().is_empty() {
                    Err(GenerationError("empty output".into()))
                } else {
                    Ok(t)
                }
            });
        (seed, result)
    };
    let results: Vec<(i64, Result<String, GenerationError>)> = if width > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(width)
            .build()
            .map_err(|e| CorpusError::Unknown {
                kind: "thread pool",
                value: e.to_string(),
            })?;
        pool.install(|| humans.docs.par_iter().enumerate().map(job).collect())
    } else {
        humans.docs.iter().enumerate().map(job).collect()
    };

    let mut docs = humans.docs.clone();
    let mut failures = Vec::new();
    for (human, (seed, result)) in humans.docs.iter().zip(results) {
        match result {
            Ok(text) => docs.push(
                Doc::new(format!("{}-syn", human.id), text, Label::Authorship(Authorship::Synthetic))
                    .with_pair(human.id.clone())
                    .with_meta("generator_id", cfg.generator_id.clone())
                    .with_meta("top_p", cfg.top_p.to_string())
                    .with_meta("max_new_tokens", cfg.max_new_tokens.to_string())
                    .with_meta("use_metadata_prompt", cfg.use_metadata_prompt.to_string())
                    .with_meta("generation_seed", seed.to_string()),
            ),
            Err(e) => failures.push(SynthesisFailure {
                doc_id: human.id.clone(),
                reason: e.0,
            }),
        }
    }
    let mut provenance = humans.provenance.clone();
    provenance.push(format!(
        "synthesize_counterparts generator={} top_p={} max_new_tokens={} metadata={} seed={}",
        cfg.generator_id, cfg.top_p, cfg.max_new_tokens, cfg.use_metadata_prompt, cfg.seed
    ));
    let corpus = Corpus::new(Schema::BinaryAuthorship, docs, provenance)?;
    corpus.validate_pairs()?;
    Ok(SynthesisOutput { corpus, failures })
}
