//! The tiny backbone and its classification head.
//!
//! Encoder: token plus position embeddings, pooled as the pooling position's
//! vector plus the mean over non-pad positions, followed by residual tanh
//! layers `h + tanh(W h + b)`. The pooling position is the first (`[CLS]`)
//! for bidirectional encoders and the last non-pad token for causal ones.
//! Head: one affine map hidden → classes.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tokenizer::{WordPiece, BOS_ID, CLS_ID, PAD_ID, SEP_ID};
use super::BackendError;
use crate::seed::{digest_hex, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackboneKind {
    #[serde(rename = "bidirectional-encoder")]
    BidirectionalEncoder,
    #[serde(rename = "causal-decoder")]
    CausalDecoder,
}

impl BackboneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::BidirectionalEncoder => "bidirectional-encoder",
            BackboneKind::CausalDecoder => "causal-decoder",
        }
    }
}

/// Shape of a tiny backbone. The vocabulary size comes from the tokenizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TinyConfig {
    pub kind: BackboneKind,
    pub hidden_size: usize,
    pub layers: usize,
    pub max_seq_len: usize,
    /// Standard deviation of the initial embedding weights.
    #[serde(default = "default_init_scale")]
    pub init_scale: f32,
}

fn default_init_scale() -> f32 {
    0.1
}

impl TinyConfig {
    pub fn bidirectional() -> Self {
        Self {
            kind: BackboneKind::BidirectionalEncoder,
            hidden_size: 32,
            layers: 2,
            max_seq_len: 512,
            init_scale: default_init_scale(),
        }
    }

    pub fn causal() -> Self {
        Self {
            kind: BackboneKind::CausalDecoder,
            ..Self::bidirectional()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let min_len = match self.kind {
            BackboneKind::BidirectionalEncoder => 2,
            BackboneKind::CausalDecoder => 1,
        };
        if self.hidden_size == 0 || self.max_seq_len < min_len || !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(BackendError::IncompatibleBackbone(format!(
                "hidden_size {} / max_seq_len {} / init_scale {} not usable",
                self.hidden_size, self.max_seq_len, self.init_scale
            )));
        }
        Ok(())
    }

    fn offsets(&self, vocab: usize) -> Offsets {
        let h = self.hidden_size;
        let tok = 0;
        let pos = tok + vocab * h;
        let layers = pos + self.max_seq_len * h;
        let total = layers + self.layers * (h * h + h);
        Offsets { pos, layers, total }
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    pos: usize,
    layers: usize,
    total: usize,
}

/// A loaded encoder: identity, tokenizer and flat weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderHandle {
    pub backbone_id: String,
    pub config: TinyConfig,
    pub tokenizer: WordPiece,
    pub params: Vec<f32>,
}

fn params_digest(tag: &str, shape: &[usize], params: &[f32]) -> String {
    let mut buf = Vec::with_capacity(params.len() * 4 + 64);
    buf.extend_from_slice(tag.as_bytes());
    for s in shape {
        buf.extend_from_slice(&(*s as u64).to_le_bytes());
    }
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    digest_hex(&buf)
}

fn normal_fill(rng: &mut impl Rng, n: usize, std: f32) -> Vec<f32> {
    let dist = Normal::new(0.0f32, std).expect("positive std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

impl EncoderHandle {
    /// Seeded random weights for a tokenizer and shape.
    pub fn initialize(backbone_id: &str, config: TinyConfig, tokenizer: WordPiece, seed: i64) -> Result<Self, BackendError> {
        config.validate()?;
        let h = config.hidden_size;
        let off = config.offsets(tokenizer.len());
        let mut rng = rng_from_seed(seed);
        let mut params = normal_fill(&mut rng, off.layers, config.init_scale);
        let w_std = 0.5 / (h as f32).sqrt();
        for _ in 0..config.layers {
            params.extend(normal_fill(&mut rng, h * h, w_std));
            params.extend(std::iter::repeat_n(0.0, h));
        }
        debug_assert_eq!(params.len(), off.total);
        Ok(Self {
            backbone_id: backbone_id.to_string(),
            config,
            tokenizer,
            params,
        })
    }

    pub fn from_parts(backbone_id: &str, config: TinyConfig, tokenizer: WordPiece, params: Vec<f32>) -> Result<Self, BackendError> {
        config.validate()?;
        let expected = config.offsets(tokenizer.len()).total;
        if params.len() != expected {
            return Err(BackendError::IncompatibleBackbone(format!(
                "expected {expected} encoder weights, found {}",
                params.len()
            )));
        }
        Ok(Self {
            backbone_id: backbone_id.to_string(),
            config,
            tokenizer,
            params,
        })
    }

    pub fn kind(&self) -> BackboneKind {
        self.config.kind
    }

    pub fn hidden_size(&self) -> usize {
        self.config.hidden_size
    }

    pub fn max_seq_len(&self) -> usize {
        self.config.max_seq_len
    }

    pub fn vocab_size(&self) -> usize {
        self.tokenizer.len()
    }

    /// Digest of every encoder weight together with the weight shapes.
    pub fn fingerprint(&self) -> String {
        params_digest(
            "encoder",
            &[self.vocab_size(), self.config.hidden_size, self.config.max_seq_len, self.config.layers],
            &self.params,
        )
    }

    /// Entries of `params` that are biases (exempt from weight decay).
    pub fn bias_mask(&self) -> Vec<bool> {
        let h = self.config.hidden_size;
        let off = self.config.offsets(self.vocab_size());
        let mut mask = vec![false; off.total];
        for l in 0..self.config.layers {
            let b = off.layers + l * (h * h + h) + h * h;
            mask[b..b + h].iter_mut().for_each(|m| *m = true);
        }
        mask
    }

    /// Token rows with special tokens, truncated to `max_len` positions and
    /// padded to the longest row.
    pub fn encode_batch(&self, texts: &[&str], max_len: usize) -> Result<TokenBatch, BackendError> {
        if max_len > self.config.max_seq_len {
            return Err(BackendError::SequenceTooLong {
                requested: max_len,
                limit: self.config.max_seq_len,
            });
        }
        let overhead = match self.config.kind {
            BackboneKind::BidirectionalEncoder => 2,
            BackboneKind::CausalDecoder => 1,
        };
        if max_len < overhead {
            return Err(BackendError::SequenceTooLong {
                requested: max_len,
                limit: overhead,
            });
        }
        let room = max_len - overhead;
        let mut rows = Vec::with_capacity(texts.len());
        let mut truncated = Vec::with_capacity(texts.len());
        for text in texts {
            let mut pieces = self.tokenizer.encode(text);
            truncated.push(pieces.len() > room);
            pieces.truncate(room);
            let row = match self.config.kind {
                BackboneKind::BidirectionalEncoder => {
                    let mut r = Vec::with_capacity(pieces.len() + 2);
                    r.push(CLS_ID);
                    r.extend(pieces);
                    r.push(SEP_ID);
                    r
                }
                BackboneKind::CausalDecoder => {
                    let mut r = Vec::with_capacity(pieces.len() + 1);
                    r.push(BOS_ID);
                    r.extend(pieces);
                    r
                }
            };
            rows.push(row);
        }
        let lengths: Vec<usize> = rows.iter().map(Vec::len).collect();
        let width = lengths.iter().copied().max().unwrap_or(0);
        for r in &mut rows {
            r.resize(width, PAD_ID);
        }
        Ok(TokenBatch {
            ids: rows,
            lengths,
            truncated,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBatch {
    pub ids: Vec<Vec<u32>>,
    /// Non-pad positions per row.
    pub lengths: Vec<usize>,
    pub truncated: Vec<bool>,
}

impl TokenBatch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn truncation_count(&self) -> usize {
        self.truncated.iter().filter(|t| **t).count()
    }

    pub fn width(&self) -> usize {
        self.ids.first().map(Vec::len).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub num_classes: usize,
    pub init_seed: i64,
    /// Row-major `num_classes × hidden` weights followed by the biases.
    pub params: Vec<f32>,
}

pub const HEAD_INIT_STD: f32 = 0.02;

impl Head {
    pub fn initialize(hidden: usize, num_classes: usize, seed: i64) -> Result<Self, BackendError> {
        if num_classes < 2 {
            return Err(BackendError::InvalidClassCount(num_classes));
        }
        let mut rng = rng_from_seed(seed);
        let mut params = normal_fill(&mut rng, num_classes * hidden, HEAD_INIT_STD);
        params.extend(std::iter::repeat_n(0.0, num_classes));
        Ok(Self {
            num_classes,
            init_seed: seed,
            params,
        })
    }

    pub fn fingerprint(&self) -> String {
        params_digest("head", &[self.num_classes, self.params.len()], &self.params)
    }

    pub fn bias_mask(&self) -> Vec<bool> {
        let w = self.params.len() - self.num_classes;
        (0..self.params.len()).map(|i| i >= w).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub encoder: EncoderHandle,
    pub head: Head,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label_index: usize,
    pub scores: Vec<f64>,
}

/// Gradients with the same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub encoder: Vec<f32>,
    pub head: Vec<f32>,
}

impl Grads {
    pub fn zeros_like(model: &ClassifierModel) -> Self {
        Self {
            encoder: vec![0.0; model.encoder.params.len()],
            head: vec![0.0; model.head.params.len()],
        }
    }

    pub fn clear(&mut self) {
        self.encoder.iter_mut().for_each(|g| *g = 0.0);
        self.head.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Intermediate values of one example's forward pass.
struct Trace {
    ids: Vec<u32>,
    /// h_0 .. h_N
    hs: Vec<Vec<f32>>,
    /// tanh activations per layer
    zs: Vec<Vec<f32>>,
    logits: Vec<f32>,
}

/// Numerically stable softmax in f64.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |a, b| a.max(*b)) as f64;
    let exps: Vec<f64> = logits.iter().map(|l| (*l as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

impl ClassifierModel {
    pub fn num_classes(&self) -> usize {
        self.head.num_classes
    }

    fn forward_one(&self, row: &[u32], len: usize) -> Trace {
        let enc = &self.encoder;
        let cfg = &enc.config;
        let h = cfg.hidden_size;
        let off = cfg.offsets(enc.vocab_size());
        let p = &enc.params;
        let ids: Vec<u32> = row[..len].to_vec();
        let pool = match cfg.kind {
            BackboneKind::BidirectionalEncoder => 0,
            BackboneKind::CausalDecoder => len.saturating_sub(1),
        };
        let mut u = vec![0.0f32; h];
        let inv = 1.0 / len.max(1) as f32;
        for (t, id) in ids.iter().enumerate() {
            let tok = &p[*id as usize * h..(*id as usize + 1) * h];
            let pos = &p[off.pos + t * h..off.pos + (t + 1) * h];
            let w = if t == pool { 1.0 + inv } else { inv };
            for k in 0..h {
                u[k] += w * (tok[k] + pos[k]);
            }
        }
        let mut hs = vec![u];
        let mut zs = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let base = off.layers + l * (h * h + h);
            let wm = &p[base..base + h * h];
            let b = &p[base + h * h..base + h * h + h];
            let prev = hs.last().expect("h0 present");
            let mut z = vec![0.0f32; h];
            let mut next = prev.clone();
            for i in 0..h {
                let row = &wm[i * h..(i + 1) * h];
                let a: f32 = row.iter().zip(prev).map(|(w, x)| w * x).sum::<f32>() + b[i];
                z[i] = a.tanh();
                next[i] += z[i];
            }
            zs.push(z);
            hs.push(next);
        }
        let c = self.head.num_classes;
        let hp = &self.head.params;
        let last = hs.last().expect("final hidden");
        let logits: Vec<f32> = (0..c)
            .map(|j| hp[j * h..(j + 1) * h].iter().zip(last).map(|(w, x)| w * x).sum::<f32>() + hp[c * h + j])
            .collect();
        Trace { ids, hs, zs, logits }
    }

    fn backward_one(&self, trace: &Trace, dlogits: &[f32], grads: &mut Grads) {
        let enc = &self.encoder;
        let cfg = &enc.config;
        let h = cfg.hidden_size;
        let off = cfg.offsets(enc.vocab_size());
        let p = &enc.params;
        let c = self.head.num_classes;
        let hp = &self.head.params;
        let last = trace.hs.last().expect("final hidden");
        let mut dh = vec![0.0f32; h];
        for j in 0..c {
            let g = dlogits[j];
            if g == 0.0 {
                continue;
            }
            for k in 0..h {
                grads.head[j * h + k] += g * last[k];
                dh[k] += g * hp[j * h + k];
            }
            grads.head[c * h + j] += g;
        }
        for l in (0..cfg.layers).rev() {
            let base = off.layers + l * (h * h + h);
            let prev = &trace.hs[l];
            let z = &trace.zs[l];
            let da: Vec<f32> = (0..h).map(|i| dh[i] * (1.0 - z[i] * z[i])).collect();
            let mut dprev = dh.clone();
            for i in 0..h {
                if da[i] == 0.0 {
                    continue;
                }
                let wrow = base + i * h;
                for k in 0..h {
                    grads.encoder[wrow + k] += da[i] * prev[k];
                    dprev[k] += da[i] * p[wrow + k];
                }
                grads.encoder[base + h * h + i] += da[i];
            }
            dh = dprev;
        }
        let len = trace.ids.len();
        let pool = match cfg.kind {
            BackboneKind::BidirectionalEncoder => 0,
            BackboneKind::CausalDecoder => len.saturating_sub(1),
        };
        let inv = 1.0 / len.max(1) as f32;
        for (t, id) in trace.ids.iter().enumerate() {
            let w = if t == pool { 1.0 + inv } else { inv };
            let tok = *id as usize * h;
            let pos = off.pos + t * h;
            for k in 0..h {
                let g = w * dh[k];
                grads.encoder[tok + k] += g;
                grads.encoder[pos + k] += g;
            }
        }
    }

    /// Mean cross-entropy over the batch times `scale`, accumulating the
    /// scaled gradients into `grads`. Returns the unscaled mean loss.
    pub fn accumulate_gradients(
        &self,
        batch: &TokenBatch,
        labels: &[usize],
        scale: f32,
        grads: &mut Grads,
    ) -> Result<f64, BackendError> {
        if batch.len() != labels.len() || batch.is_empty() {
            return Err(BackendError::BatchShape {
                rows: batch.len(),
                labels: labels.len(),
            });
        }
        let n = batch.len() as f32;
        let mut loss = 0.0f64;
        for ((row, len), label) in batch.ids.iter().zip(&batch.lengths).zip(labels) {
            if *label >= self.head.num_classes {
                return Err(BackendError::InvalidClassCount(*label));
            }
            let trace = self.forward_one(row, *len);
            let probs = softmax(&trace.logits);
            loss -= probs[*label].max(1e-300).ln();
            let dlogits: Vec<f32> = probs
                .iter()
                .enumerate()
                .map(|(j, pj)| ((*pj - if j == *label { 1.0 } else { 0.0 }) as f32) * scale / n)
                .collect();
            self.backward_one(&trace, &dlogits, grads);
        }
        Ok(loss / batch.len() as f64)
    }

    pub fn predict_batch(&self, batch: &TokenBatch) -> Vec<Prediction> {
        batch
            .ids
            .iter()
            .zip(&batch.lengths)
            .map(|(row, len)| {
                let scores = softmax(&self.forward_one(row, *len).logits);
                Prediction {
                    label_index: argmax(&scores),
                    scores,
                }
            })
            .collect()
    }

    /// Class scores for each text, truncating at the encoder's limit.
    pub fn predict(&self, texts: &[&str]) -> Result<Vec<Prediction>, BackendError> {
        self.predict_with_len(texts, self.encoder.max_seq_len())
    }

    pub fn predict_with_len(&self, texts: &[&str], max_len: usize) -> Result<Vec<Prediction>, BackendError> {
        if self.encoder.params.is_empty() || self.head.params.len() != self.head.num_classes * (self.encoder.hidden_size() + 1) {
            return Err(BackendError::ModelNotReady);
        }
        let batch = self.encoder.encode_batch(texts, max_len)?;
        Ok(self.predict_batch(&batch))
    }

    /// Combined digest of encoder and head weights.
    pub fn fingerprint(&self) -> String {
        digest_hex(format!("{}:{}", self.encoder.fingerprint(), self.head.fingerprint()).as_bytes())
    }
}

pub fn attach_head(encoder: EncoderHandle, num_classes: usize, seed: i64) -> Result<ClassifierModel, BackendError> {
    let head = Head::initialize(encoder.hidden_size(), num_classes, seed)?;
    Ok(ClassifierModel { encoder, head })
}

/// A new model carrying `model`'s encoder and a fresh head.
pub fn swap_head(model: &ClassifierModel, num_classes: usize, seed: i64) -> Result<ClassifierModel, BackendError> {
    attach_head(model.encoder.clone(), num_classes, seed)
}
