//! Sequence-classification adapter over small trainable backbones: loading,
//! head attachment and swapping, tokenization, prediction and checkpoints.
//!
//! Two backbones are built in, `tiny-bidirectional` and `tiny-causal`. Their
//! WordPiece vocabulary is trained on the crate's bundled texts and their
//! weights are drawn from a fixed seed, so every process loading them gets
//! the same fingerprint. A registry maps further ids to saved blobs or to
//! other tiny shapes.

mod checkpoint;
mod model;
mod tokenizer;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{
    encoder_from_bytes, encoder_to_bytes, load_checkpoint, load_checkpoint_meta, model_from_bytes, model_to_bytes,
    save_checkpoint, write_atomic, CheckpointMeta, CheckpointRef, MAGIC, META_FILE, WEIGHTS_FILE,
};
pub use model::{
    attach_head, softmax, swap_head, BackboneKind, ClassifierModel, EncoderHandle, Grads, Head, Prediction,
    TinyConfig, TokenBatch, HEAD_INIT_STD,
};
pub use tokenizer::{basic_tokenize, WordPiece, BOS_ID, CLS_ID, PAD_ID, SEP_ID, SPECIALS, UNK_ID};

pub const BUILTIN_BIDIRECTIONAL: &str = "tiny-bidirectional";
pub const BUILTIN_CAUSAL: &str = "tiny-causal";
/// Seed of the built-in backbones' weights.
pub const BUILTIN_WEIGHT_SEED: i64 = 20_231_207;
pub const BUILTIN_VOCAB_SIZE: usize = 4096;

const VOCAB_TEXTS: [&str; 3] = [
    include_str!("../../data/human_sample.txt"),
    include_str!("../../data/generator_corpus.txt"),
    include_str!("../../data/emotion_headlines.csv"),
];

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backbone {0:?} not found")]
    BackboneNotFound(String),
    #[error("incompatible backbone: {0}")]
    IncompatibleBackbone(String),
    #[error("a classification head needs at least 2 classes (got {0})")]
    InvalidClassCount(usize),
    #[error("max_len {requested} is outside the backbone limit {limit}")]
    SequenceTooLong { requested: usize, limit: usize },
    #[error("batch has {rows} rows but {labels} labels")]
    BatchShape { rows: usize, labels: usize },
    #[error("model is not ready for prediction")]
    ModelNotReady,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Tokenizer shared by the built-in backbones.
pub fn builtin_tokenizer() -> WordPiece {
    static CELL: OnceLock<WordPiece> = OnceLock::new();
    CELL.get_or_init(|| WordPiece::train(&VOCAB_TEXTS.join("\n"), BUILTIN_VOCAB_SIZE)).clone()
}

/// A built-in backbone with weights drawn from `seed`.
pub fn builtin_encoder(id: &str, seed: i64) -> Result<EncoderHandle, BackendError> {
    let config = match id {
        BUILTIN_BIDIRECTIONAL => TinyConfig::bidirectional(),
        BUILTIN_CAUSAL => TinyConfig::causal(),
        other => return Err(BackendError::BackboneNotFound(other.to_string())),
    };
    EncoderHandle::initialize(id, config, builtin_tokenizer(), seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum RegistryEntry {
    /// A saved encoder or model blob (a file, or a directory holding
    /// `encoder.bin` or `weights.bin`).
    Path {
        path: PathBuf,
        #[serde(default)]
        kind: Option<BackboneKind>,
    },
    /// A tiny backbone of a custom shape using the built-in vocabulary.
    Tiny {
        config: TinyConfig,
        #[serde(default = "builtin_seed")]
        init_seed: i64,
    },
}

fn builtin_seed() -> i64 {
    BUILTIN_WEIGHT_SEED
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BackboneRegistry {
    #[serde(default)]
    pub backbones: BTreeMap<String, RegistryEntry>,
}

pub const ENCODER_FILE: &str = "encoder.bin";

pub fn save_encoder(encoder: &EncoderHandle, path: &Path) -> Result<(), BackendError> {
    write_atomic(path, &encoder_to_bytes(encoder)).map_err(|e| BackendError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_path(id: &str, path: &Path, kind: Option<BackboneKind>) -> Result<EncoderHandle, BackendError> {
    let file = if path.is_dir() {
        [ENCODER_FILE, WEIGHTS_FILE]
            .iter()
            .map(|f| path.join(f))
            .find(|p| p.is_file())
            .ok_or_else(|| BackendError::BackboneNotFound(format!("{id} (no blob in {})", path.display())))?
    } else if path.is_file() {
        path.to_path_buf()
    } else {
        return Err(BackendError::BackboneNotFound(format!("{id} ({} missing)", path.display())));
    };
    let bytes = std::fs::read(&file).map_err(|e| BackendError::Io {
        path: file.clone(),
        source: e,
    })?;
    let mut enc = encoder_from_bytes(&bytes).map_err(|e| BackendError::IncompatibleBackbone(format!("{}: {e}", file.display())))?;
    if let Some(k) = kind {
        if k != enc.kind() {
            return Err(BackendError::IncompatibleBackbone(format!(
                "{id} is registered as {} but the blob is {}",
                k.as_str(),
                enc.kind().as_str()
            )));
        }
    }
    enc.backbone_id = id.to_string();
    Ok(enc)
}

/// Resolves a backbone id through the registry, then the built-ins.
pub fn load_encoder(backbone_id: &str, registry: &BackboneRegistry) -> Result<EncoderHandle, BackendError> {
    match registry.backbones.get(backbone_id) {
        Some(RegistryEntry::Path { path, kind }) => load_path(backbone_id, path, *kind),
        Some(RegistryEntry::Tiny { config, init_seed }) => {
            EncoderHandle::initialize(backbone_id, *config, builtin_tokenizer(), *init_seed)
        }
        None => builtin_encoder(backbone_id, BUILTIN_WEIGHT_SEED),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        let reg = BackboneRegistry::default();
        let bi = load_encoder(BUILTIN_BIDIRECTIONAL, &reg).unwrap();
        assert_eq!(bi.kind(), BackboneKind::BidirectionalEncoder);
        assert_eq!(bi.max_seq_len(), 512);
        let causal = load_encoder(BUILTIN_CAUSAL, &reg).unwrap();
        assert_eq!(causal.kind(), BackboneKind::CausalDecoder);
        assert_eq!(bi.fingerprint(), load_encoder(BUILTIN_BIDIRECTIONAL, &reg).unwrap().fingerprint());
        assert!(matches!(load_encoder("bert-base", &reg), Err(BackendError::BackboneNotFound(_))));
    }

    #[test]
    fn registry_entries() {
        let dir = tempfile::tempdir().unwrap();
        let enc = builtin_encoder(BUILTIN_CAUSAL, 4).unwrap();
        save_encoder(&enc, &dir.path().join(ENCODER_FILE)).unwrap();
        std::fs::write(dir.path().join("junk.bin"), b"not a blob").unwrap();
        let mut reg = BackboneRegistry::default();
        reg.backbones.insert("saved".into(), RegistryEntry::Path { path: dir.path().into(), kind: None });
        reg.backbones.insert(
            "wrong-kind".into(),
            RegistryEntry::Path { path: dir.path().into(), kind: Some(BackboneKind::BidirectionalEncoder) },
        );
        reg.backbones.insert("junk".into(), RegistryEntry::Path { path: dir.path().join("junk.bin"), kind: None });
        reg.backbones.insert("gone".into(), RegistryEntry::Path { path: dir.path().join("nope"), kind: None });
        let mut small = TinyConfig::bidirectional();
        small.hidden_size = 8;
        reg.backbones.insert("small".into(), RegistryEntry::Tiny { config: small, init_seed: 1 });

        let loaded = load_encoder("saved", &reg).unwrap();
        assert_eq!(loaded.fingerprint(), enc.fingerprint());
        assert_eq!(loaded.backbone_id, "saved");
        assert!(matches!(load_encoder("wrong-kind", &reg), Err(BackendError::IncompatibleBackbone(_))));
        assert!(matches!(load_encoder("junk", &reg), Err(BackendError::IncompatibleBackbone(_))));
        assert!(matches!(load_encoder("gone", &reg), Err(BackendError::BackboneNotFound(_))));
        assert_eq!(load_encoder("small", &reg).unwrap().hidden_size(), 8);
    }

    #[test]
    fn registry_serde_shape() {
        let json = r#"{"backbones":{"x":{"source":"tiny","config":{"kind":"causal-decoder","hidden_size":4,"layers":1,"max_seq_len":64}}}}"#;
        let reg: BackboneRegistry = serde_json::from_str(json).unwrap();
        let RegistryEntry::Tiny { config, init_seed } = &reg.backbones["x"] else { panic!() };
        assert_eq!(config.kind, BackboneKind::CausalDecoder);
        assert_eq!(*init_seed, BUILTIN_WEIGHT_SEED);
    }

    #[test]
    fn swap_preserves_encoder() {
        let enc = builtin_encoder(BUILTIN_BIDIRECTIONAL, 2).unwrap();
        let fp = enc.fingerprint();
        let m6 = attach_head(enc, 6, 42).unwrap();
        assert_eq!(m6.encoder.fingerprint(), fp);
        let again = attach_head(m6.encoder.clone(), 6, 42).unwrap();
        assert_eq!(again.head, m6.head);
        let m2 = swap_head(&m6, 2, 7).unwrap();
        assert_eq!(m2.encoder.fingerprint(), fp);
        assert_eq!(m2.num_classes(), 2);
        assert_eq!(m6.num_classes(), 6);
        assert_eq!(swap_head(&m6, 2, 7).unwrap(), m2);
        assert!(matches!(swap_head(&m6, 1, 7), Err(BackendError::InvalidClassCount(1))));
    }

    #[test]
    fn encode_batch_contract() {
        let enc = builtin_encoder(BUILTIN_BIDIRECTIONAL, 2).unwrap();
        let long = vec!["word"; 2000].join(" ");
        let b = enc.encode_batch(&[&long, "short"], 512).unwrap();
        assert_eq!(b.width(), 512);
        assert_eq!(b.lengths[0], 512);
        assert_eq!(b.truncated, vec![true, false]);
        assert_eq!(b.truncation_count(), 1);
        assert!(enc.encode_batch(&[], 512).unwrap().is_empty());
        let twin = enc.encode_batch(&["same text", "same text"], 64).unwrap();
        assert_eq!(twin.ids[0], twin.ids[1]);
        assert!(matches!(enc.encode_batch(&["x"], 513), Err(BackendError::SequenceTooLong { .. })));
    }

    #[test]
    fn predictions_are_normalized_and_batch_invariant() {
        let model = attach_head(builtin_encoder(BUILTIN_CAUSAL, 3).unwrap(), 6, 1).unwrap();
        let texts = ["a short one", "", "Another rather longer sentence about markets and weather."];
        let all = model.predict(&texts).unwrap();
        for (i, t) in texts.iter().enumerate() {
            let single = model.predict(&[t]).unwrap();
            assert_eq!(single[0].label_index, all[i].label_index);
            let sum: f64 = all[i].scores.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert_eq!(all[i].scores.len(), 6);
        }
        let two = swap_head(&model, 2, 1).unwrap().predict(&["x"]).unwrap();
        assert_eq!(two[0].scores.len(), 2);
    }
}
