use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Authorship, Corpus, Label, Schema};
use crate::evalkit::count_words;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatGpt100Rules {
    pub per_class: usize,
    pub max_words: usize,
    /// Longer/shorter word-count ratio allowed within a pair.
    pub max_length_ratio: f64,
}

impl Default for ChatGpt100Rules {
    fn default() -> Self {
        Self {
            per_class: 50,
            max_words: 384,
            max_length_ratio: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatGpt100Report {
    pub passes: bool,
    pub schema_ok: bool,
    pub human: usize,
    pub synthetic: usize,
    pub imbalance: bool,
    /// `(id, words)` of documents over the word cap.
    pub over_limit: Vec<(String, usize)>,
    pub unpaired: Vec<String>,
    /// `(human id, synthetic id, ratio)` of pairs outside the length ratio.
    pub length_mismatched: Vec<(String, String, f64)>,
}

pub fn validate_chatgpt100(corpus: &Corpus, rules: &ChatGpt100Rules) -> ChatGpt100Report {
    let schema_ok = corpus.schema == Schema::BinaryAuthorship;
    let human = corpus.count_of(Label::Authorship(Authorship::Human));
    let synthetic = corpus.count_of(Label::Authorship(Authorship::Synthetic));
    let imbalance = human != rules.per_class || synthetic != rules.per_class;

    let words: HashMap<&str, usize> = corpus
        .docs
        .iter()
        .map(|d| (d.id.as_str(), count_words(&d.text)))
        .collect();
    let over_limit: Vec<(String, usize)> = corpus
        .docs
        .iter()
        .filter(|d| words[d.id.as_str()] > rules.max_words)
        .map(|d| (d.id.clone(), words[d.id.as_str()]))
        .collect();

    let labels: HashMap<&str, Label> = corpus.docs.iter().map(|d| (d.id.as_str(), d.label)).collect();
    let mut paired: HashSet<&str> = HashSet::new();
    let mut length_mismatched = Vec::new();
    for doc in &corpus.docs {
        let Some(pair) = doc.pair_id.as_deref() else { continue };
        let Some(other) = labels.get(pair) else { continue };
        let (Some(a), Some(b)) = (doc.label.authorship(), other.authorship()) else { continue };
        if a == b {
            continue;
        }
        paired.insert(doc.id.as_str());
        paired.insert(pair);
        let (h, s) = if a == Authorship::Human { (doc.id.as_str(), pair) } else { (pair, doc.id.as_str()) };
        let (wh, ws) = (words[h] as f64, words[s] as f64);
        let ratio = wh.max(ws) / wh.min(ws).max(1.0);
        if ratio > rules.max_length_ratio {
            length_mismatched.push((h.to_string(), s.to_string(), ratio));
        }
    }
    length_mismatched.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    length_mismatched.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let unpaired: Vec<String> = corpus
        .docs
        .iter()
        .filter(|d| !paired.contains(d.id.as_str()))
        .map(|d| d.id.clone())
        .collect();

    let passes = schema_ok
        && !imbalance
        && over_limit.is_empty()
        && unpaired.is_empty()
        && length_mismatched.is_empty();
    ChatGpt100Report {
        passes,
        schema_ok,
        human,
        synthetic,
        imbalance,
        over_limit,
        unpaired,
        length_mismatched,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpora::Doc;

    fn words(n: usize) -> String {
        vec!["word"; n].join(" ")
    }

    fn corpus(pairs: usize, human_len: usize, synth_len: usize) -> Corpus {
        let mut docs = Vec::new();
        for i in 0..pairs {
            docs.push(Doc::new(format!("h{i}"), words(human_len), Label::Authorship(Authorship::Human)));
            docs.push(
                Doc::new(format!("s{i}"), words(synth_len), Label::Authorship(Authorship::Synthetic))
                    .with_pair(format!("h{i}")),
            );
        }
        Corpus::new(Schema::BinaryAuthorship, docs, vec!["unit".into()]).unwrap()
    }

    #[test]
    fn conforming_corpus_passes() {
        let r = validate_chatgpt100(&corpus(50, 300, 280), &ChatGpt100Rules::default());
        assert!(r.passes, "{r:?}");
    }

    #[test]
    fn word_cap_boundary() {
        let mut c = corpus(50, 300, 300);
        c.docs[0].text = words(384);
        assert!(validate_chatgpt100(&c, &ChatGpt100Rules::default()).over_limit.is_empty());
        c.docs[0].text = words(385);
        let r = validate_chatgpt100(&c, &ChatGpt100Rules::default());
        assert_eq!(r.over_limit, vec![("h0".to_string(), 385)]);
        assert!(!r.passes);
    }

    #[test]
    fn imbalance_and_unpaired() {
        let mut c = corpus(50, 100, 100);
        let last = c.docs.len() - 1;
        c.docs[last].label = Label::Authorship(Authorship::Human);
        c.docs[last].pair_id = None;
        let r = validate_chatgpt100(&c, &ChatGpt100Rules::default());
        assert!(r.imbalance);
        assert_eq!((r.human, r.synthetic), (51, 49));
        assert!(r.unpaired.contains(&"h49".to_string()));
        assert!(!r.passes);
    }

    #[test]
    fn length_mismatch() {
        let r = validate_chatgpt100(&corpus(50, 300, 100), &ChatGpt100Rules::default());
        assert_eq!(r.length_mismatched.len(), 50);
        assert!(!r.passes);
    }
}
