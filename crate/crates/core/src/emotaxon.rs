//! Emotion and sentiment label spaces, and the mappings between them.
//!
//! Three source vocabularies are understood: the fifteen GoodNewsEveryone
//! labels, the six AffectiveText emotions and binary SST-2 sentiment. All of
//! them are reduced to either the six Ekman emotions or two-way sentiment.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpora::{Corpus, Label};
use crate::seed::rng_from_seed;

/// Versioned GNE-15 → Ekman-6 table, one `source<TAB>target` per line.
pub const GNE_MAPPING_TSV: &str = include_str!("../data/gne15_to_ekman.tsv");
const POLARITY_LEXICON_TSV: &str = include_str!("../data/polarity_lexicon.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("unknown {scheme} label {label:?}")]
    UnknownLabel { scheme: SourceScheme, label: String },
    #[error("wrong source scheme: expected {expected}, got {actual}")]
    WrongScheme {
        expected: SourceScheme,
        actual: SourceScheme,
    },
    #[error("surprise needs a sentiment resolver and the text it applies to")]
    ResolverUnavailable,
    #[error("cannot randomize labels of an empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EkmanLabel {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
}

impl EkmanLabel {
    /// Canonical order. Also the tie-break order for argmax over intensities.
    pub const ALL: [EkmanLabel; 6] = [
        EkmanLabel::Anger,
        EkmanLabel::Disgust,
        EkmanLabel::Fear,
        EkmanLabel::Happiness,
        EkmanLabel::Sadness,
        EkmanLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EkmanLabel::Anger => "anger",
            EkmanLabel::Disgust => "disgust",
            EkmanLabel::Fear => "fear",
            EkmanLabel::Happiness => "happiness",
            EkmanLabel::Sadness => "sadness",
            EkmanLabel::Surprise => "surprise",
        }
    }
}

impl fmt::Display for EkmanLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EkmanLabel {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize(s);
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == norm)
            .ok_or(TaxonomyError::UnknownLabel {
                scheme: SourceScheme::Ekman6,
                label: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative,
    Positive,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 2] = [SentimentLabel::Negative, SentimentLabel::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "negative" => Ok(SentimentLabel::Negative),
            "positive" => Ok(SentimentLabel::Positive),
            _ => Err(TaxonomyError::UnknownLabel {
                scheme: SourceScheme::Sst2,
                label: s.to_string(),
            }),
        }
    }
}

/// Vocabulary a raw annotation was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceScheme {
    #[serde(rename = "gne-15")]
    Gne15,
    #[serde(rename = "affective-text")]
    AffectiveText,
    #[serde(rename = "sst-2")]
    Sst2,
    #[serde(rename = "ekman-6")]
    Ekman6,
}

impl fmt::Display for SourceScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceScheme::Gne15 => "gne-15",
            SourceScheme::AffectiveText => "affective-text",
            SourceScheme::Sst2 => "sst-2",
            SourceScheme::Ekman6 => "ekman-6",
        })
    }
}

pub const GNE_VOCABULARY: [&str; 15] = [
    "anger",
    "annoyance",
    "disgust",
    "fear",
    "guilt",
    "joy",
    "love/like",
    "negative anticipation/pessimism",
    "negative surprise",
    "positive anticipation/optimism",
    "positive surprise",
    "pride",
    "sadness",
    "shame",
    "trust",
];

const AFFECTIVE_TEXT_VOCABULARY: [&str; 6] =
    ["anger", "disgust", "fear", "joy", "sadness", "surprise"];

/// SST-2 ships numeric labels upstream; both spellings are accepted.
const SST2_VOCABULARY: [&str; 4] = ["negative", "positive", "0", "1"];

/// A label as it appears in a source dataset, validated against that
/// dataset's closed vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawEmotionLabel {
    scheme: SourceScheme,
    text: String,
}

impl RawEmotionLabel {
    pub fn parse(scheme: SourceScheme, label: &str) -> Result<Self, TaxonomyError> {
        let norm = normalize(label);
        let vocab: &[&str] = match scheme {
            SourceScheme::Gne15 => &GNE_VOCABULARY,
            SourceScheme::AffectiveText => &AFFECTIVE_TEXT_VOCABULARY,
            SourceScheme::Sst2 => &SST2_VOCABULARY,
            SourceScheme::Ekman6 => &["anger", "disgust", "fear", "happiness", "sadness", "surprise"],
        };
        if vocab.contains(&norm.as_str()) {
            Ok(Self { scheme, text: norm })
        } else {
            Err(TaxonomyError::UnknownLabel {
                scheme,
                label: label.to_string(),
            })
        }
    }

    pub fn scheme(&self) -> SourceScheme {
        self.scheme
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Reduces any emotion vocabulary to Ekman-6. SST-2 labels go through
    /// [`sentiment_to_emotion`].
    pub fn to_ekman(&self) -> Result<EkmanLabel, TaxonomyError> {
        match self.scheme {
            SourceScheme::Gne15 => map_gne_label(self),
            SourceScheme::AffectiveText if self.text == "joy" => Ok(EkmanLabel::Happiness),
            SourceScheme::AffectiveText | SourceScheme::Ekman6 => self.text.parse(),
            SourceScheme::Sst2 => Ok(sentiment_to_emotion(self.to_sentiment()?)),
        }
    }

    pub fn to_sentiment(&self) -> Result<SentimentLabel, TaxonomyError> {
        if self.scheme != SourceScheme::Sst2 {
            return Err(TaxonomyError::WrongScheme {
                expected: SourceScheme::Sst2,
                actual: self.scheme,
            });
        }
        Ok(match self.text.as_str() {
            "positive" | "1" => SentimentLabel::Positive,
            _ => SentimentLabel::Negative,
        })
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// GoodNewsEveryone (15 labels) to Ekman (6 labels).
pub fn map_gne_label(raw: &RawEmotionLabel) -> Result<EkmanLabel, TaxonomyError> {
    if raw.scheme != SourceScheme::Gne15 {
        return Err(TaxonomyError::WrongScheme {
            expected: SourceScheme::Gne15,
            actual: raw.scheme,
        });
    }
    use EkmanLabel::*;
    let target = match raw.text.as_str() {
        "disgust" => Disgust,
        "fear" => Fear,
        "sadness" | "guilt" | "shame" => Sadness,
        "joy" | "trust" | "pride" | "love/like" | "positive anticipation/optimism" => Happiness,
        "anger" | "annoyance" | "negative anticipation/pessimism" => Anger,
        "negative surprise" | "positive surprise" => Surprise,
        other => {
            return Err(TaxonomyError::UnknownLabel {
                scheme: SourceScheme::Gne15,
                label: other.to_string(),
            })
        }
    };
    Ok(target)
}

/// Convenience wrapper parsing a GNE label string first.
pub fn map_gne_str(label: &str) -> Result<EkmanLabel, TaxonomyError> {
    map_gne_label(&RawEmotionLabel::parse(SourceScheme::Gne15, label)?)
}

/// Renders the GNE mapping as the shipped schema file would read.
pub fn gne_mapping_tsv() -> String {
    let mut out = String::from("# gne15-to-ekman6 v1\n# source_label<TAB>target_label\n");
    for label in GNE_VOCABULARY {
        let target = map_gne_str(label).expect("vocabulary is closed");
        out.push_str(&format!("{label}\t{target}\n"));
    }
    out
}

/// Parses a `source<TAB>target` schema file (comments start with `#`).
pub fn parse_mapping_tsv(text: &str) -> Result<Vec<(String, EkmanLabel)>, TaxonomyError> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let (src, dst) = line.split_once('\t').ok_or(TaxonomyError::UnknownLabel {
                scheme: SourceScheme::Gne15,
                label: line.to_string(),
            })?;
            Ok((src.to_string(), dst.parse()?))
        })
        .collect()
}

pub fn sentiment_to_emotion(s: SentimentLabel) -> EkmanLabel {
    match s {
        SentimentLabel::Positive => EkmanLabel::Happiness,
        SentimentLabel::Negative => EkmanLabel::Sadness,
    }
}

/// Decides the polarity of a "surprise" item from its text.
pub trait SurpriseResolver: Send + Sync {
    /// Recorded in provenance next to every resolved label.
    fn resolver_id(&self) -> &str;
    fn resolve(&self, text: &str) -> SentimentLabel;
}

/// Sentiment produced for an emotion, with the resolver that decided it
/// when the emotion was surprise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedSentiment {
    pub label: SentimentLabel,
    pub resolver_id: Option<String>,
}

pub fn emotion_to_sentiment(
    emotion: EkmanLabel,
    text: Option<&str>,
    resolver: Option<&dyn SurpriseResolver>,
) -> Result<ResolvedSentiment, TaxonomyError> {
    let label = match emotion {
        EkmanLabel::Happiness => SentimentLabel::Positive,
        EkmanLabel::Sadness | EkmanLabel::Fear | EkmanLabel::Anger | EkmanLabel::Disgust => {
            SentimentLabel::Negative
        }
        EkmanLabel::Surprise => {
            let (Some(text), Some(resolver)) = (text, resolver) else {
                return Err(TaxonomyError::ResolverUnavailable);
            };
            return Ok(ResolvedSentiment {
                label: resolver.resolve(text),
                resolver_id: Some(resolver.resolver_id().to_string()),
            });
        }
    };
    Ok(ResolvedSentiment {
        label,
        resolver_id: None,
    })
}

/// Signed-weight lexicon scorer. A non-positive total is negative.
#[derive(Debug, Clone)]
pub struct LexiconResolver {
    id: String,
    weights: HashMap<String, i32>,
}

impl LexiconResolver {
    pub fn new(id: impl Into<String>, weights: HashMap<String, i32>) -> Self {
        Self {
            id: id.into(),
            weights,
        }
    }

    pub fn from_tsv(id: impl Into<String>, tsv: &str) -> Self {
        let weights = tsv
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let (w, v) = l.split_once('\t')?;
                Some((w.trim().to_lowercase(), v.trim().parse().ok()?))
            })
            .collect();
        Self::new(id, weights)
    }

    pub fn score(&self, text: &str) -> i32 {
        text.split(|c: char| !c.is_alphabetic())
            .filter(|w| !w.is_empty())
            .map(|w| self.weight_of(&w.to_lowercase()))
            .sum()
    }

    fn weight_of(&self, word: &str) -> i32 {
        if let Some(w) = self.weights.get(word) {
            return *w;
        }
        for suffix in ["s", "es", "ed", "ing", "ly"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                if let Some(w) = self.weights.get(stem) {
                    return *w;
                }
            }
        }
        0
    }
}

impl Default for LexiconResolver {
    fn default() -> Self {
        Self::from_tsv("polarity-lexicon-v1", POLARITY_LEXICON_TSV)
    }
}

impl SurpriseResolver for LexiconResolver {
    fn resolver_id(&self) -> &str {
        &self.id
    }

    fn resolve(&self, text: &str) -> SentimentLabel {
        if self.score(text) > 0 {
            SentimentLabel::Positive
        } else {
            SentimentLabel::Negative
        }
    }
}

/// Permutes the label column with a seeded shuffle. Texts, ids and the label
/// histogram are unchanged.
pub fn randomize_labels(corpus: &Corpus, seed: i64) -> Result<Corpus, TaxonomyError> {
    if corpus.docs.is_empty() {
        return Err(TaxonomyError::EmptyCorpus);
    }
    let mut labels: Vec<Label> = corpus.docs.iter().map(|d| d.label).collect();
    labels.shuffle(&mut rng_from_seed(seed));
    let mut out = corpus.clone();
    for (doc, label) in out.docs.iter_mut().zip(labels) {
        doc.label = label;
    }
    out.provenance.push(format!("randomize_labels seed={seed}"));
    Ok(out)
}
