//! Labeled document collections: loading, splitting, ablation recipes and
//! synthetic counterpart generation.

mod ablation;
mod chatgpt100;
mod formats;
mod generate;
mod split;
pub mod toy;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::emotaxon::{EkmanLabel, SentimentLabel, TaxonomyError};
use crate::seed::digest_hex;

pub use ablation::{at_to_single_label, compose_ablation, AblationOutput, AblationSources, Recipe};
pub use chatgpt100::{validate_chatgpt100, ChatGpt100Report, ChatGpt100Rules};
pub use formats::{load_corpus, parse_corpus, write_corpus, write_corpus_file, CorpusFormat};
pub use generate::{
    build_prompt, nucleus_sample, synthesize_counterparts, GenerationConfig, GenerationError,
    MarkovGenerator, SynthesisFailure, SynthesisOutput, TextGenerator,
};
pub use split::{
    derive_data_seeds, make_seeded_split, SeedTriple, SplitManifest, SplitRatios, SplitSet,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    FormatViolation { line: usize, reason: String },
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("corpus provenance must not be empty")]
    EmptyProvenance,
    #[error("pair_id {pair_id:?} of {id:?} does not resolve to a document of the opposite authorship")]
    DanglingPair { id: String, pair_id: String },
    #[error("corpus of {size} documents is too small for {parts} ratio parts")]
    TooSmall { size: usize, parts: u32 },
    #[error("binary corpus is unbalanced: {human} human vs {synthetic} synthetic")]
    UnbalancedInput { human: usize, synthetic: usize },
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("recipe {recipe} needs source {source_name:?}")]
    MissingSource { recipe: String, source_name: String },
    #[error("unknown {kind} {value:?}")]
    Unknown { kind: &'static str, value: String },
    #[error("intensity scores are all zero")]
    AllZero,
    #[error("manifest does not match corpus: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Authorship {
    Human,
    Synthetic,
}

impl Authorship {
    pub const ALL: [Authorship; 2] = [Authorship::Human, Authorship::Synthetic];

    pub fn as_str(self) -> &'static str {
        match self {
            Authorship::Human => "human",
            Authorship::Synthetic => "synthetic",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Authorship::Human => Authorship::Synthetic,
            Authorship::Synthetic => Authorship::Human,
        }
    }
}

/// Label space of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Schema {
    #[serde(rename = "binary-authorship")]
    BinaryAuthorship,
    #[serde(rename = "emotion-6")]
    Emotion6,
    #[serde(rename = "sentiment-2")]
    Sentiment2,
}

impl Schema {
    pub fn num_classes(self) -> usize {
        match self {
            Schema::BinaryAuthorship | Schema::Sentiment2 => 2,
            Schema::Emotion6 => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Schema::BinaryAuthorship => "binary-authorship",
            Schema::Emotion6 => "emotion-6",
            Schema::Sentiment2 => "sentiment-2",
        }
    }

    /// Labels in class-index order.
    pub fn labels(self) -> Vec<Label> {
        (0..self.num_classes())
            .map(|i| self.label_at(i).expect("index in range"))
            .collect()
    }

    pub fn label_at(self, index: usize) -> Option<Label> {
        match self {
            Schema::BinaryAuthorship => Authorship::ALL.get(index).map(|a| Label::Authorship(*a)),
            Schema::Emotion6 => EkmanLabel::from_index(index).map(Label::Emotion),
            Schema::Sentiment2 => SentimentLabel::from_index(index).map(Label::Sentiment),
        }
    }

    /// The class treated as positive by binary metrics.
    pub fn positive_label(self) -> Option<Label> {
        match self {
            Schema::BinaryAuthorship => Some(Label::Authorship(Authorship::Synthetic)),
            Schema::Sentiment2 => Some(Label::Sentiment(SentimentLabel::Positive)),
            Schema::Emotion6 => None,
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Schema {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "binary-authorship" | "binary" => Ok(Schema::BinaryAuthorship),
            "emotion-6" | "emotion" => Ok(Schema::Emotion6),
            "sentiment-2" | "sentiment" => Ok(Schema::Sentiment2),
            other => Err(CorpusError::Unknown {
                kind: "schema",
                value: other.to_string(),
            }),
        }
    }
}

/// A document label. The three label vocabularies share no strings, so the
/// textual form alone identifies the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Authorship(Authorship),
    Emotion(EkmanLabel),
    Sentiment(SentimentLabel),
}

impl Label {
    pub fn schema(self) -> Schema {
        match self {
            Label::Authorship(_) => Schema::BinaryAuthorship,
            Label::Emotion(_) => Schema::Emotion6,
            Label::Sentiment(_) => Schema::Sentiment2,
        }
    }

    /// Class index within the label's schema.
    pub fn index(self) -> usize {
        match self {
            Label::Authorship(a) => a as usize,
            Label::Emotion(e) => e.index(),
            Label::Sentiment(s) => s.index(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Authorship(a) => a.as_str(),
            Label::Emotion(e) => e.as_str(),
            Label::Sentiment(s) => s.as_str(),
        }
    }

    pub fn authorship(self) -> Option<Authorship> {
        match self {
            Label::Authorship(a) => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase();
        match norm.as_str() {
            "human" => return Ok(Label::Authorship(Authorship::Human)),
            "synthetic" => return Ok(Label::Authorship(Authorship::Synthetic)),
            _ => {}
        }
        if let Ok(e) = norm.parse::<EkmanLabel>() {
            return Ok(Label::Emotion(e));
        }
        if let Ok(s) = norm.parse::<SentimentLabel>() {
            return Ok(Label::Sentiment(s));
        }
        Err(CorpusError::Unknown {
            kind: "label",
            value: s.to_string(),
        })
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Doc {
    pub id: String,
    pub text: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Doc {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            pair_id: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn with_pair(mut self, pair_id: impl Into<String>) -> Self {
        self.pair_id = Some(pair_id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub schema: Schema,
    pub docs: Vec<Doc>,
    pub provenance: Vec<String>,
}

impl Corpus {
    /// Builds a corpus and checks the per-document invariants.
    pub fn new(schema: Schema, docs: Vec<Doc>, provenance: Vec<String>) -> Result<Self, CorpusError> {
        let corpus = Self {
            schema,
            docs,
            provenance,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.provenance.is_empty() {
            return Err(CorpusError::EmptyProvenance);
        }
        let mut seen = HashSet::with_capacity(self.docs.len());
        for doc in &self.docs {
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(doc.id.clone()));
            }
            if doc.label.schema() != self.schema {
                return Err(CorpusError::SchemaMismatch {
                    expected: self.schema.to_string(),
                    found: format!("label {:?} on {:?}", doc.label.as_str(), doc.id),
                });
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(())
    }

    /// Every `pair_id` must name a document of the opposite authorship in
    /// this corpus. Split corpora generally fail this check, full ones pass.
    pub fn validate_pairs(&self) -> Result<(), CorpusError> {
        let by_id: HashMap<&str, &Doc> = self.docs.iter().map(|d| (d.id.as_str(), d)).collect();
        for doc in &self.docs {
            let Some(pair) = &doc.pair_id else { continue };
            let ok = match (doc.label.authorship(), by_id.get(pair.as_str())) {
                (Some(a), Some(other)) => other.label.authorship() == Some(a.opposite()),
                _ => false,
            };
            if !ok {
                return Err(CorpusError::DanglingPair {
                    id: doc.id.clone(),
                    pair_id: pair.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.id.clone()).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.docs.iter().map(|d| d.text.as_str()).collect()
    }

    pub fn label_histogram(&self) -> BTreeMap<Label, usize> {
        let mut h = BTreeMap::new();
        for d in &self.docs {
            *h.entry(d.label).or_insert(0) += 1;
        }
        h
    }

    pub fn count_of(&self, label: Label) -> usize {
        self.docs.iter().filter(|d| d.label == label).count()
    }

    /// Content digest over schema and every record, independent of provenance.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        buf.extend_from_slice(self.schema.as_str().as_bytes());
        buf.push(b'\n');
        for doc in &self.docs {
            buf.extend_from_slice(&serde_json::to_vec(doc).expect("doc serializes"));
            buf.push(b'\n');
        }
        digest_hex(&buf)
    }

    /// Sub-corpus with the given ids in the given order.
    pub fn select(&self, ids: &[String], provenance_note: &str) -> Result<Corpus, CorpusError> {
        let by_id: HashMap<&str, &Doc> = self.docs.iter().map(|d| (d.id.as_str(), d)).collect();
        let docs = ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|d| (*d).clone())
                    .ok_or_else(|| CorpusError::ManifestMismatch(format!("unknown id {id:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut provenance = self.provenance.clone();
        provenance.push(provenance_note.to_string());
        Corpus::new(self.schema, docs, provenance)
    }

    /// Concatenates corpora of the same schema.
    pub fn union(parts: &[&Corpus], note: &str) -> Result<Corpus, CorpusError> {
        let schema = parts.first().map(|c| c.schema).ok_or(CorpusError::EmptyProvenance)?;
        let mut docs = Vec::new();
        let mut provenance = Vec::new();
        for part in parts {
            if part.schema != schema {
                return Err(CorpusError::SchemaMismatch {
                    expected: schema.to_string(),
                    found: part.schema.to_string(),
                });
            }
            docs.extend(part.docs.iter().cloned());
            provenance.extend(part.provenance.iter().cloned());
        }
        provenance.push(note.to_string());
        Corpus::new(schema, docs, provenance)
    }
}
