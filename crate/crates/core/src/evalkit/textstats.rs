//! Word and sentence counting for corpus length analysis.
//!
//! The segmentation rule is frozen as [`SEGMENTER_VERSION`]: a sentence ends
//! at `.`, `?` or `!` (optionally followed by closing quotes or brackets)
//! when the next non-space character is an uppercase letter, or at the end of
//! the text. A period ending a known abbreviation does not end a sentence.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpora::{Authorship, Corpus, Schema};

pub const SEGMENTER_VERSION: &str = "seg-v1";

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "inc", "ltd", "co", "corp", "no",
    "gen", "gov", "sen", "rep", "lt", "col", "sgt", "capt", "mt", "jan", "feb", "mar", "apr", "jun",
    "jul", "aug", "sep", "sept", "oct", "nov", "dec", "e.g", "i.e", "u.s", "u.k", "a.m", "p.m",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}'];

fn is_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    if word.is_empty() {
        return false;
    }
    // Single initials such as "J." in "J. Smith".
    if word.chars().count() == 1 && word.chars().all(char::is_alphabetic) {
        return true;
    }
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits text into trimmed, non-empty sentences.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '?' | '!') {
            // absorb runs of terminators and closing quotes
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '?' | '!') || CLOSERS.contains(&chars[j].1)) {
                j += 1;
            }
            let end = chars.get(j).map(|(p, _)| *p).unwrap_or(text.len());
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = if k == chars.len() {
                true
            } else {
                k > j && chars[k].1.is_uppercase()
            };
            let abbrev = c == '.' && j == i + 1 && is_abbreviation(&text[start..pos]);
            if boundary && !abbrev {
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

fn strip_punct(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Whitespace tokens that still contain something after stripping leading
/// and trailing punctuation.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().filter(|t| !strip_punct(t).is_empty()).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStatsReport {
    pub docs: usize,
    pub words_per_article: MeanStd,
    pub sentences_per_article: MeanStd,
    /// Pooled over every sentence of every document.
    pub words_per_sentence: MeanStd,
    /// Correlation of paired human/synthetic word counts; shared by both
    /// sides of a pair analysis.
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthAnalysis {
    pub segmenter: String,
    pub human: LengthStatsReport,
    pub synthetic: LengthStatsReport,
    pub pairs: usize,
    /// Why `pearson_r` is absent, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_error: Option<String>,
}

/// Per-document word and sentence counts.
pub fn doc_lengths(text: &str) -> (usize, Vec<usize>) {
    let sentences: Vec<usize> = split_sentences(text).iter().map(|s| count_words(s)).collect();
    (count_words(text), sentences)
}

fn side_stats<'a>(texts: impl Iterator<Item = &'a str>) -> LengthStatsReport {
    let mut words = Vec::new();
    let mut sents = Vec::new();
    let mut wps = Vec::new();
    for t in texts {
        let (w, s) = doc_lengths(t);
        words.push(w as f64);
        sents.push(s.len() as f64);
        wps.extend(s.iter().map(|&x| x as f64));
    }
    LengthStatsReport {
        docs: words.len(),
        words_per_article: MeanStd::of(&words),
        sentences_per_article: MeanStd::of(&sents),
        words_per_sentence: MeanStd::of(&wps),
        pearson_r: None,
    }
}

/// `(human words, synthetic words)` for each resolvable human/synthetic pair.
pub fn paired_word_counts(corpus: &Corpus) -> Vec<(String, String, usize, usize)> {
    let by_id: HashMap<&str, &crate::corpora::Doc> = corpus.docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut pairs = Vec::new();
    for doc in &corpus.docs {
        if doc.label.authorship() != Some(Authorship::Synthetic) {
            continue;
        }
        let Some(h) = doc.pair_id.as_deref().and_then(|p| by_id.get(p)) else { continue };
        if h.label.authorship() != Some(Authorship::Human) {
            continue;
        }
        pairs.push((h.id.clone(), doc.id.clone(), count_words(&h.text), count_words(&doc.text)));
    }
    pairs
}

pub fn length_stats(corpus: &Corpus) -> Result<LengthAnalysis, EvalError> {
    if corpus.schema != Schema::BinaryAuthorship {
        return Err(EvalError::NotBinary(corpus.schema.to_string()));
    }
    let side = |a: Authorship| {
        corpus
            .docs
            .iter()
            .filter(move |d| d.label.authorship() == Some(a))
            .map(|d| d.text.as_str())
    };
    let mut human = side_stats(side(Authorship::Human));
    let mut synthetic = side_stats(side(Authorship::Synthetic));
    if human.docs == 0 || synthetic.docs == 0 {
        return Err(EvalError::MissingClass);
    }
    let pairs = paired_word_counts(corpus);
    let xs: Vec<f64> = pairs.iter().map(|p| p.2 as f64).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.3 as f64).collect();
    let (r, correlation_error) = if pairs.is_empty() {
        (None, Some(EvalError::NoPairs.to_string()))
    } else {
        match pearson(&xs, &ys) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    human.pearson_r = r;
    synthetic.pearson_r = r;
    Ok(LengthAnalysis {
        segmenter: SEGMENTER_VERSION.to_string(),
        human,
        synthetic,
        pairs: pairs.len(),
        correlation_error,
    })
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(EvalError::DegenerateInput("fewer than two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Equal-width histogram with bins `[lo + i*w, lo + (i+1)*w)`.
pub fn histogram(values: &[f64], bin_width: f64) -> Vec<(f64, usize)> {
    if values.is_empty() || bin_width <= 0.0 {
        return Vec::new();
    }
    let lo = (values.iter().cloned().fold(f64::INFINITY, f64::min) / bin_width).floor() * bin_width;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bins = ((hi - lo) / bin_width).floor() as usize + 1;
    let mut counts = vec![0usize; bins];
    for v in values {
        let i = (((v - lo) / bin_width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (lo + i as f64 * bin_width, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hello_world() {
        let (w, s) = doc_lengths("Hello world. Bye.");
        assert_eq!(w, 3);
        assert_eq!(s, vec![2, 1]);
    }

    #[test]
    fn segmentation_rule() {
        assert_eq!(split_sentences("Mr. Smith went home. He slept."), vec!["Mr. Smith went home.", "He slept."]);
        assert_eq!(split_sentences("Prices rose 2.5 percent. Then fell"), vec!["Prices rose 2.5 percent.", "Then fell"]);
        assert_eq!(split_sentences("Really?! Yes."), vec!["Really?!", "Yes."]);
        assert_eq!(split_sentences("He said \"stop.\" Then left."), vec!["He said \"stop.\"", "Then left."]);
        assert_eq!(split_sentences("lower case. continues here."), vec!["lower case. continues here."]);
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn word_counting() {
        assert_eq!(count_words("  -- well, (then) ok ... "), 3);
        assert_eq!(count_words("U.S.-based firm's data"), 3);
        assert_eq!(count_words(""), 0);
    }

    #[test]
    fn pearson_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
        assert!(matches!(pearson(&xs, &[1.0; 4]), Err(EvalError::DegenerateInput(_))));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(EvalError::DegenerateInput(_))));
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[1.0, 4.0, 5.0, 9.0], 5.0);
        assert_eq!(h, vec![(0.0, 2), (5.0, 2)]);
    }
}
