//! Checkpoint files: magic `S2SCKPT1`, a JSON header (hyperparameters,
//! vocabulary, RNG state, block table), then raw little-endian 64-bit
//! parameter blocks in a fixed order. Reloading reproduces bit-identical
//! forward results.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hyper::Hyperparams;
use super::model::{BlockMut, Seq2SeqModel};
use super::vocab::Vocab;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"S2SCKPT1";
const FORMAT_VERSION: u32 = 1;

/// A training snapshot: everything needed to resume or evaluate.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub iteration: u64,
    pub hyperparams: Hyperparams,
    pub vocab: Vocab,
    pub model: Seq2SeqModel,
    pub rng: ChaCha8Rng,
}

#[derive(Serialize, Deserialize)]
struct HeaderBlock {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    iteration: u64,
    hyperparams: Hyperparams,
    vocab: Vec<String>,
    rng: ChaCha8Rng,
    blocks: Vec<HeaderBlock>,
}

/// Serializes a checkpoint to bytes.
pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let blocks = ckpt.model.blocks();
    let header = Header {
        format_version: FORMAT_VERSION,
        iteration: ckpt.iteration,
        hyperparams: ckpt.hyperparams.clone(),
        vocab: ckpt.vocab.symbols().to_vec(),
        rng: ckpt.rng.clone(),
        blocks: blocks
            .iter()
            .map(|(name, block)| HeaderBlock {
                name: name.clone(),
                shape: block.shape(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, block) in &blocks {
        for value in block.values() {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_to_bytes(ckpt))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parses checkpoint bytes, validating magic, version, and block shapes.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let fail = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < MAGIC.len() + 8 {
        return Err(fail("file too short"));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(fail("bad magic bytes"));
    }
    let mut len_bytes = [0u8; 8];
    len_bytes.copy_from_slice(&bytes[MAGIC.len()..MAGIC.len() + 8]);
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let header_start = MAGIC.len() + 8;
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err(fail("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[header_start..data_start])
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    header
        .hyperparams
        .validate()
        .map_err(|e| Error::Checkpoint(format!("bad hyperparameters: {e}")))?;
    let vocab =
        Vocab::from_symbols(header.vocab).map_err(|e| Error::Checkpoint(format!("bad vocabulary: {e}")))?;

    let mut model = Seq2SeqModel::zeroed(&header.hyperparams);
    let mut offset = data_start;
    let mut header_blocks = header.blocks.iter();
    for (name, block) in model.blocks_mut() {
        let expected = header_blocks
            .next()
            .ok_or_else(|| fail("missing parameter blocks"))?;
        if expected.name != name {
            return Err(Error::Checkpoint(format!(
                "block order mismatch: expected {name:?}, file has {:?}",
                expected.name
            )));
        }
        let (len, shape_ok) = match &block {
            BlockMut::Matrix(m) => (m.len(), expected.shape == m.shape().to_vec()),
            BlockMut::Vector(v) => (v.len(), expected.shape == v.shape().to_vec()),
        };
        if !shape_ok {
            return Err(Error::Checkpoint(format!(
                "block {name:?} shape mismatch: file has {:?}",
                expected.shape
            )));
        }
        let needed = len * 8;
        if bytes.len() < offset + needed {
            return Err(fail("truncated parameter data"));
        }
        let mut chunk = bytes[offset..offset + needed].chunks_exact(8);
        match block {
            BlockMut::Matrix(m) => {
                for value in m.iter_mut() {
                    let mut raw = [0u8; 8];
                    raw.copy_from_slice(chunk.next().expect("sized above"));
                    *value = f64::from_le_bytes(raw);
                }
            }
            BlockMut::Vector(v) => {
                for value in v.iter_mut() {
                    let mut raw = [0u8; 8];
                    raw.copy_from_slice(chunk.next().expect("sized above"));
                    *value = f64::from_le_bytes(raw);
                }
            }
        }
        offset += needed;
    }
    if header_blocks.next().is_some() {
        return Err(fail("extra parameter blocks in header"));
    }
    if offset != bytes.len() {
        return Err(fail("trailing bytes after parameter data"));
    }

    Ok(Checkpoint {
        iteration: header.iteration,
        hyperparams: header.hyperparams,
        vocab,
        model,
        rng: header.rng,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::batch::prepare_batch;
    use crate::seq2seq::net::forward_loss;
    use rand::SeedableRng;

    fn toy_checkpoint() -> Checkpoint {
        let hp = Hyperparams {
            vocab_size: 6,
            embed_dim: 3,
            hidden_dim: 3,
            num_layers: 2,
            minibatch: 1,
            buckets: vec![(3, 4)],
            ..Hyperparams::desk()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = Seq2SeqModel::init(&hp, &mut rng);
        let vocab = Vocab::build(["x", "y"], hp.vocab_size).unwrap();
        Checkpoint {
            iteration: 2000,
            hyperparams: hp,
            vocab,
            model,
            rng,
        }
    }

    #[test]
    fn roundtrip_preserves_forward_bits() {
        let ckpt = toy_checkpoint();
        let bytes = checkpoint_to_bytes(&ckpt);
        let loaded = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.iteration, 2000);
        assert_eq!(loaded.vocab, ckpt.vocab);
        assert_eq!(loaded.model, ckpt.model);

        let batch = prepare_batch(&[(vec![4, 5], vec![5])], &ckpt.hyperparams).unwrap();
        let (a, _) = forward_loss(&ckpt.model, &batch).unwrap();
        let (b, _) = forward_loss(&loaded.model, &batch).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn wrong_magic_rejected() {
        let mut bytes = checkpoint_to_bytes(&toy_checkpoint());
        bytes[0] = b'X';
        assert!(checkpoint_from_bytes(&bytes).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let bytes = checkpoint_to_bytes(&toy_checkpoint());
        let cut = &bytes[..bytes.len() - 5];
        assert!(checkpoint_from_bytes(cut).is_err());
    }

    #[test]
    fn trailing_garbage_rejected() {
        let mut bytes = checkpoint_to_bytes(&toy_checkpoint());
        bytes.push(0);
        assert!(checkpoint_from_bytes(&bytes).is_err());
    }

    #[test]
    fn rng_state_roundtrips() {
        use rand::RngCore;
        let ckpt = toy_checkpoint();
        let bytes = checkpoint_to_bytes(&ckpt);
        let mut original = ckpt.rng.clone();
        let mut loaded = checkpoint_from_bytes(&bytes).unwrap().rng;
        assert_eq!(original.next_u64(), loaded.next_u64());
    }
}
