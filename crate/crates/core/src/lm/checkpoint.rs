use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LmDims, LmParameters, Vocabulary};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CCQALM\0\x01";

#[derive(Serialize, Deserialize)]
struct Header {
    dims: LmDims,
    vocab: Vocabulary,
}

/// Weights plus the vocabulary they were trained against.
///
/// Layout: 8-byte magic, little-endian u32 header length, JSON header, then
/// every tensor as little-endian f64 in [`super::TENSOR_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: LmParameters,
    pub vocab: Vocabulary,
}

impl Checkpoint {
    pub fn new(params: LmParameters, vocab: Vocabulary) -> Result<Self> {
        if params.dims.vocab_size != vocab.len() {
            return Err(Error::Contract(format!(
                "model vocabulary {} differs from tokenizer vocabulary {}",
                params.dims.vocab_size,
                vocab.len()
            )));
        }
        Ok(Self { params, vocab })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            dims: self.params.dims,
            vocab: self.vocab.clone(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.params.num_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.tensors() {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Contract(format!("malformed checkpoint: {m}"));
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = 12usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[12..body])?;
        let mut params = LmParameters::zeros(header.dims);
        let need = 8 * params.num_params();
        if bytes.len() - body != need {
            return Err(bad(&format!(
                "expected {need} tensor bytes, found {}",
                bytes.len() - body
            )));
        }
        let mut chunks = bytes[body..].chunks_exact(8);
        for t in params.tensors_mut() {
            for x in t.iter_mut() {
                *x = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
            }
        }
        Self::new(params, header.vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
