//! Greedy longest-match-first WordPiece over a lowercasing basic tokenizer.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const BOS: &str = "[BOS]";
pub const SPECIALS: [&str; 5] = [PAD, UNK, CLS, SEP, BOS];

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const BOS_ID: u32 = 4;

const MAX_WORD_CHARS: usize = 100;
const BASE_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordPiece {
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

/// Lowercases, splits on whitespace and isolates punctuation characters.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let mut cur = String::new();
        for c in raw.chars().flat_map(char::to_lowercase) {
            if is_punct(c) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else if !c.is_control() {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

impl WordPiece {
    /// Vocabulary from an explicit token list; the specials must come first
    /// in their fixed order.
    pub fn from_vocab(vocab: Vec<String>) -> Result<Self, String> {
        for (i, s) in SPECIALS.iter().enumerate() {
            if vocab.get(i).map(String::as_str) != Some(*s) {
                return Err(format!("vocabulary entry {i} must be {s}"));
            }
        }
        let mut wp = Self {
            vocab,
            index: HashMap::new(),
        };
        wp.rebuild_index()?;
        Ok(wp)
    }

    /// Builds a vocabulary from sample text: the specials, single characters
    /// (plain and `##` continuation forms) and then the most frequent words,
    /// ties broken alphabetically, up to `max_size` entries.
    pub fn train(text: &str, max_size: usize) -> Self {
        let mut vocab: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut chars: Vec<char> = BASE_ALPHABET.chars().collect();
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for tok in basic_tokenize(text) {
            chars.extend(tok.chars());
            *counts.entry(tok).or_insert(0) += 1;
        }
        chars.sort_unstable();
        chars.dedup();
        for c in &chars {
            vocab.push(c.to_string());
        }
        for c in &chars {
            if !is_punct(*c) {
                vocab.push(format!("##{c}"));
            }
        }
        let mut words: Vec<(String, u64)> = counts.into_iter().filter(|(w, _)| w.chars().count() > 1).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for (w, _) in words {
            if vocab.len() >= max_size {
                break;
            }
            vocab.push(w);
        }
        Self::from_vocab(vocab).expect("specials placed first")
    }

    pub fn rebuild_index(&mut self) -> Result<(), String> {
        self.index.clear();
        for (i, t) in self.vocab.iter().enumerate() {
            if self.index.insert(t.clone(), i as u32).is_some() {
                return Err(format!("duplicate vocabulary entry {t:?}"));
            }
        }
        Ok(())
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    fn word_pieces(&self, word: &str, out: &mut Vec<u32>) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            out.push(UNK_ID);
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                let body: String = chars[start..end].iter().collect();
                let piece = if start == 0 { body } else { format!("##{body}") };
                if let Some(id) = self.id(&piece) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => {
                    out.push(UNK_ID);
                    return;
                }
            }
        }
        out.extend(pieces);
    }

    /// Subword ids without special tokens.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for word in basic_tokenize(text) {
            self.word_pieces(&word, &mut ids);
        }
        ids
    }
}
