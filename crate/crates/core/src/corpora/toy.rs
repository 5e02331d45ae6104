//! Small bundled corpora for desk-scale runs and tests.
//!
//! `human_sample.txt` holds original short human-written sentences, released
//! into the public domain with this crate. `emotion_headlines.csv` is a
//! templated GNE-format headline set. The bundled Markov generator is trained
//! on a separate text of business-news sentences, so generated documents are
//! separable from the human ones by vocabulary.

use std::collections::HashMap;

use super::{
    parse_corpus, synthesize_counterparts, Authorship, Corpus, CorpusError, CorpusFormat, Doc,
    GenerationConfig, Label, MarkovGenerator, Schema, SynthesisOutput, TextGenerator,
};
use crate::seed::derive_seed;

const HUMAN_SAMPLE: &str = include_str!("../../data/human_sample.txt");
const EMOTION_HEADLINES: &str = include_str!("../../data/emotion_headlines.csv");

pub fn human_sentences() -> Vec<&'static str> {
    HUMAN_SAMPLE.lines().filter(|l| !l.trim().is_empty()).collect()
}

/// The first `n` bundled human sentences as a human-only binary corpus.
pub fn human_sample(n: usize) -> Result<Corpus, CorpusError> {
    let sentences = human_sentences();
    if n > sentences.len() {
        return Err(CorpusError::TooSmall {
            size: sentences.len(),
            parts: n as u32,
        });
    }
    let docs = sentences[..n]
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Doc::new(format!("toy-h{i:03}"), *s, Label::Authorship(Authorship::Human))
                .with_meta("domain", "sample.local")
        })
        .collect();
    Corpus::new(Schema::BinaryAuthorship, docs, vec!["bundled human sample v1".into()])
}

/// `n_human` bundled sentences plus one generated counterpart each.
pub fn desk_detection_corpus(n_human: usize, cfg: &GenerationConfig) -> Result<SynthesisOutput, CorpusError> {
    synthesize_counterparts(&human_sample(n_human)?, &MarkovGenerator::bundled(), cfg, 1)
}

/// 300 GNE-format headlines mapped to Ekman-6.
pub fn desk_emotion_corpus() -> Result<Corpus, CorpusError> {
    parse_corpus(EMOTION_HEADLINES, CorpusFormat::GneCsv, "bundled emotion headlines v1")
}

pub fn emotion_headlines_csv() -> &'static str {
    EMOTION_HEADLINES
}

/// 50 + 50 paired documents shaped like the zero-shot evaluation set. Each
/// generated text is extended or truncated to its human partner's word count.
pub fn desk_chatgpt100(seed: i64) -> Result<Corpus, CorpusError> {
    let cfg = GenerationConfig {
        seed,
        ..GenerationConfig::default()
    };
    let generator = MarkovGenerator::bundled();
    let mut corpus = synthesize_counterparts(&human_sample(50)?, &generator, &cfg, 1)?.corpus;
    let lengths: HashMap<String, usize> = corpus
        .docs
        .iter()
        .map(|d| (d.id.clone(), d.text.split_whitespace().count()))
        .collect();
    for doc in &mut corpus.docs {
        let Some(pair) = &doc.pair_id else { continue };
        let target = lengths[pair];
        let mut words: Vec<String> = doc.text.split_whitespace().map(str::to_string).collect();
        let mut round = 0u64;
        while words.len() < target {
            round += 1;
            let more = generator
                .generate(&words.join(" "), &cfg, derive_seed(seed, &[round, words.len() as u64]))
                .map_err(|e| CorpusError::Unknown {
                    kind: "generation",
                    value: e.to_string(),
                })?;
            words.extend(more.split_whitespace().map(str::to_string));
        }
        words.truncate(target);
        doc.text = words.join(" ");
    }
    corpus.provenance.push("synthetic texts length-matched to partners".into());
    corpus.validate()?;
    Ok(corpus)
}
