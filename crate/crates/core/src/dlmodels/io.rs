//! Versioned binary model container.
//!
//! Layout: magic bytes "AEDM", a little-endian u32 format version, a
//! little-endian u64 JSON header length, the JSON header (architecture,
//! vocabulary hash, history, tensor directory, payload checksum), then the
//! tensor payloads as raw little-endian f64, in directory order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::numkit::{ParamSet, Tensor};
use crate::preprocess::Vocabulary;
use crate::scalar::Scalar;

use super::{ArchitectureConfig, DlError, EpochStats, TrainedModel};

const MAGIC: &[u8; 4] = b"AEDM";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Element offset into the payload.
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: ArchitectureConfig,
    vocab_hash: String,
    history: Vec<EpochStats>,
    tensors: Vec<TensorEntry>,
    /// Hex SHA-256 of the payload bytes.
    checksum: String,
}

/// Stable identity of a vocabulary, used to detect model/vocabulary drift.
pub fn vocabulary_hash(vocab: &Vocabulary) -> String {
    let json = serde_json::to_string(vocab).expect("vocabulary serializes");
    hex(&Sha256::digest(json.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, source: std::io::Error) -> DlError {
    DlError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_model<S: Scalar>(path: &Path, model: &TrainedModel<S>) -> Result<(), DlError> {
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    for (name, tensor, _) in model.params.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: tensor.shape().to_vec(),
            offset,
            len: tensor.len(),
        });
        for &v in tensor.data() {
            payload.extend_from_slice(&v.to_f64().unwrap_or(f64::NAN).to_le_bytes());
        }
        offset += tensor.len();
    }
    let header = Header {
        arch: model.arch,
        vocab_hash: model.vocab_hash.clone(),
        history: model.history.clone(),
        tensors,
        checksum: hex(&Sha256::digest(&payload)),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(MAGIC).map_err(|e| io_err(path, e))?;
    file.write_all(&FORMAT_VERSION.to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    file.write_all(&(header_json.len() as u64).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    file.write_all(&header_json).map_err(|e| io_err(path, e))?;
    file.write_all(&payload).map_err(|e| io_err(path, e))
}

/// Loads a model, verifying magic, format version and payload checksum.
/// When `expected_vocab_hash` is given it must match the stored hash.
pub fn load_model<S: Scalar>(
    path: &Path,
    expected_vocab_hash: Option<&str>,
) -> Result<TrainedModel<S>, DlError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 16 {
        return Err(DlError::Malformed("file shorter than the fixed prefix".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(DlError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DlError::VersionMismatch {
            expected: FORMAT_VERSION,
            got: version,
        });
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let payload_start = 16 + header_len;
    if bytes.len() < payload_start {
        return Err(DlError::Malformed("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[16..payload_start])
        .map_err(|e| DlError::Malformed(format!("header: {e}")))?;
    let payload = &bytes[payload_start..];
    if hex(&Sha256::digest(payload)) != header.checksum {
        return Err(DlError::ChecksumMismatch);
    }
    if let Some(expected) = expected_vocab_hash {
        if expected != header.vocab_hash {
            return Err(DlError::VocabularyMismatch {
                expected: header.vocab_hash,
                got: expected.to_string(),
            });
        }
    }

    let mut params = ParamSet::new();
    for entry in &header.tensors {
        let start = entry.offset * 8;
        let end = start + entry.len * 8;
        if end > payload.len() {
            return Err(DlError::Malformed(format!(
                "tensor {} extends past the payload",
                entry.name
            )));
        }
        let data: Vec<S> = payload[start..end]
            .chunks_exact(8)
            .map(|c| S::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let tensor = Tensor::from_vec(&entry.shape, data)
            .map_err(|_| DlError::Malformed(format!("tensor {} shape/length mismatch", entry.name)))?;
        params.insert(&entry.name, tensor);
    }
    Ok(TrainedModel {
        arch: header.arch,
        params,
        vocab_hash: header.vocab_hash,
        history: header.history,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_model, predict, CnnModelConfig};
    use super::*;
    use crate::corpus::NoteType;
    use crate::preprocess::TokenSequence;

    fn model() -> TrainedModel<f64> {
        let cfg = CnnModelConfig::desk(NoteType::Radiology, 21);
        let mut m = build_model(super::super::ArchitectureConfig::Cnn(cfg)).unwrap();
        m.vocab_hash = "abc123".into();
        m
    }

    fn probe(seq_len: usize) -> TokenSequence {
        TokenSequence {
            indices: (0..seq_len).map(|i| i % 40).collect(),
            original_length: seq_len,
        }
    }

    #[test]
    fn round_trip_predictions_are_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.aedm");
        let m = model();
        save_model(&path, &m).unwrap();
        let loaded: TrainedModel<f64> = load_model(&path, Some("abc123")).unwrap();
        let input = probe(m.arch.seq_len());
        assert_eq!(predict(&m, &input).unwrap(), predict(&loaded, &input).unwrap());
    }

    #[test]
    fn bumped_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.aedm");
        save_model(&path, &model()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_model::<f64>(&path, None),
            Err(DlError::VersionMismatch { got: 9, .. })
        ));
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.aedm");
        save_model(&path, &model()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xFF;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_model::<f64>(&path, None),
            Err(DlError::ChecksumMismatch)
        ));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.aedm");
        save_model(&path, &model()).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_model::<f64>(&path, None).is_err());
    }

    #[test]
    fn vocabulary_hash_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.aedm");
        save_model(&path, &model()).unwrap();
        match load_model::<f64>(&path, Some("other")) {
            Err(DlError::VocabularyMismatch { expected, got }) => {
                assert_eq!(expected, "abc123");
                assert_eq!(got, "other");
            }
            other => panic!("expected vocabulary mismatch, got {other:?}"),
        }
    }

    #[test]
    fn non_model_file_rejected_by_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.aedm");
        fs::write(&path, b"definitely not a model file").unwrap();
        assert!(matches!(load_model::<f64>(&path, None), Err(DlError::BadMagic)));
    }

    #[test]
    fn vocabulary_hash_is_stable_and_content_sensitive() {
        let lists = vec![vec!["hip".to_string(), "disloc".to_string()]];
        let v1 = Vocabulary::build(&lists, 100).unwrap();
        let v2 = Vocabulary::build(&lists, 100).unwrap();
        assert_eq!(vocabulary_hash(&v1), vocabulary_hash(&v2));
        let other = Vocabulary::build(&lists, 1).unwrap();
        assert_ne!(vocabulary_hash(&v1), vocabulary_hash(&other));
    }
}
