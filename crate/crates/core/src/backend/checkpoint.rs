//! Weight blobs and their metadata.
//!
//! Blob layout: the 8-byte magic, a little-endian u64 header length, a JSON
//! header (backbone id, shape, vocabulary, head shape), the encoder weights
//! and then the head weights as little-endian f32, and finally the SHA-256 of
//! everything before it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{ClassifierModel, EncoderHandle, Head, TinyConfig};
use super::tokenizer::WordPiece;
use super::BackendError;
use crate::corpora::SeedTriple;
use crate::evalkit::MetricsReport;

pub const MAGIC: &[u8; 8] = b"EMDCKPT1";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlobHeader {
    backbone_id: String,
    config: TinyConfig,
    vocab: Vec<String>,
    encoder_len: usize,
    /// Absent for encoder-only blobs.
    head: Option<HeadHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HeadHeader {
    num_classes: usize,
    init_seed: i64,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage_name: String,
    pub task_schema: String,
    pub epoch: u32,
    pub val_metrics: Option<MetricsReport>,
    pub model_seed: i64,
    pub data_seeds: SeedTriple,
    pub config_digest: String,
    pub encoder_fingerprint: String,
    pub head_fingerprint: String,
}

/// Location of a saved checkpoint plus its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub dir: PathBuf,
    pub meta: CheckpointMeta,
}

fn corrupt(msg: impl Into<String>) -> BackendError {
    BackendError::CorruptCheckpoint(msg.into())
}

fn encode(encoder: &EncoderHandle, head: Option<&Head>) -> Vec<u8> {
    let header = BlobHeader {
        backbone_id: encoder.backbone_id.clone(),
        config: encoder.config,
        vocab: encoder.tokenizer.vocab().to_vec(),
        encoder_len: encoder.params.len(),
        head: head.map(|h| HeadHeader {
            num_classes: h.num_classes,
            init_seed: h.init_seed,
            len: h.params.len(),
        }),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let head_len = head.map(|h| h.params.len()).unwrap_or(0);
    let mut out = Vec::with_capacity(16 + json.len() + 4 * (encoder.params.len() + head_len) + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &encoder.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    if let Some(h) = head {
        for p in &h.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect()
}

fn decode(bytes: &[u8]) -> Result<(EncoderHandle, Option<Head>), BackendError> {
    if bytes.len() < 16 + 32 {
        return Err(corrupt("blob shorter than its fixed framing"));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(corrupt("checksum mismatch"));
    }
    let hlen = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let json_end = 16usize.checked_add(hlen).filter(|e| *e <= body.len()).ok_or_else(|| corrupt("header length out of range"))?;
    let header: BlobHeader = serde_json::from_slice(&body[16..json_end]).map_err(|e| corrupt(format!("header: {e}")))?;
    let head_len = header.head.as_ref().map(|h| h.len).unwrap_or(0);
    let expected = json_end + 4 * (header.encoder_len + head_len);
    if body.len() != expected {
        return Err(corrupt(format!("expected {expected} bytes before the trailer, found {}", body.len())));
    }
    let enc_end = json_end + 4 * header.encoder_len;
    let tokenizer = WordPiece::from_vocab(header.vocab).map_err(corrupt)?;
    let encoder = EncoderHandle::from_parts(&header.backbone_id, header.config, tokenizer, read_f32s(&body[json_end..enc_end]))
        .map_err(|e| corrupt(e.to_string()))?;
    let head = match header.head {
        None => None,
        Some(h) => {
            let params = read_f32s(&body[enc_end..]);
            if h.num_classes < 2 || params.len() != h.num_classes * (encoder.hidden_size() + 1) {
                return Err(corrupt("head shape does not match the encoder"));
            }
            Some(Head {
                num_classes: h.num_classes,
                init_seed: h.init_seed,
                params,
            })
        }
    };
    Ok((encoder, head))
}

pub fn model_to_bytes(model: &ClassifierModel) -> Vec<u8> {
    encode(&model.encoder, Some(&model.head))
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ClassifierModel, BackendError> {
    match decode(bytes)? {
        (encoder, Some(head)) => Ok(ClassifierModel { encoder, head }),
        (_, None) => Err(corrupt("blob holds no classification head")),
    }
}

pub fn encoder_to_bytes(encoder: &EncoderHandle) -> Vec<u8> {
    encode(encoder, None)
}

/// Reads the encoder from either an encoder-only or a full model blob.
pub fn encoder_from_bytes(bytes: &[u8]) -> Result<EncoderHandle, BackendError> {
    decode(bytes).map(|(e, _)| e)
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn io_err(path: &Path, e: std::io::Error) -> BackendError {
    BackendError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Saves weights and metadata into `dir`; fingerprints in `meta` are
/// overwritten with the model's actual ones.
pub fn save_checkpoint(model: &ClassifierModel, meta: &CheckpointMeta, dir: &Path) -> Result<CheckpointRef, BackendError> {
    let mut meta = meta.clone();
    meta.encoder_fingerprint = model.encoder.fingerprint();
    meta.head_fingerprint = model.head.fingerprint();
    let weights = dir.join(WEIGHTS_FILE);
    write_atomic(&weights, &model_to_bytes(model)).map_err(|e| io_err(&weights, e))?;
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_vec_pretty(&meta).expect("meta serializes");
    write_atomic(&meta_path, &json).map_err(|e| io_err(&meta_path, e))?;
    Ok(CheckpointRef {
        dir: dir.to_path_buf(),
        meta,
    })
}

pub fn load_checkpoint_meta(dir: &Path) -> Result<CheckpointMeta, BackendError> {
    let path = dir.join(META_FILE);
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| corrupt(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(dir: &Path) -> Result<(ClassifierModel, CheckpointMeta), BackendError> {
    let path = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    let model = model_from_bytes(&bytes)?;
    let meta = load_checkpoint_meta(dir)?;
    if meta.encoder_fingerprint != model.encoder.fingerprint() || meta.head_fingerprint != model.head.fingerprint() {
        return Err(corrupt("weights do not match the recorded fingerprints"));
    }
    Ok((model, meta))
}
