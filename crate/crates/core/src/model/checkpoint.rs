//! Binary checkpoint format.
//!
//! All integers are little-endian `u32` unless noted; floats are
//! little-endian IEEE-754 `f64`.
//!
//! ```text
//! magic            8 bytes  "LSMRCKPT"
//! format version   u32      (currently 1)
//! num_layers, num_heads, embed_dim, ffn_dim, vocab_size, max_positions
//!                  6 x u32
//! dropout          f64
//! vocabulary       u32 count, then count x u32 code points (ids 5..)
//! tensors          u32 count, then per tensor: u32 rank, rank x u32 dims
//! weights          every tensor's values, in parameter order
//! ```
//!
//! Identical weights serialise to identical bytes on every platform.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tokenizer::Vocabulary;

use super::config::ModelConfig;
use super::params::ModelParams;

const MAGIC: &[u8; 8] = b"LSMRCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// A model together with the vocabulary it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocabulary,
}

impl Checkpoint {
    pub fn new(params: ModelParams, vocab: Vocabulary) -> Result<Self> {
        if params.config().vocab_size != vocab.len() {
            return Err(Error::invalid(format!(
                "model vocab_size {} but vocabulary has {} entries",
                params.config().vocab_size,
                vocab.len()
            )));
        }
        Ok(Self { params, vocab })
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = self.params.config();
        let mut out = Vec::with_capacity(64 + self.params.num_params() * 8);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        for v in [
            c.num_layers,
            c.num_heads,
            c.embed_dim,
            c.ffn_dim,
            c.vocab_size,
            c.max_positions,
        ] {
            put_u32(&mut out, v as u32);
        }
        out.extend_from_slice(&c.dropout.to_le_bytes());
        put_u32(&mut out, self.vocab.chars().len() as u32);
        for &ch in self.vocab.chars() {
            put_u32(&mut out, ch as u32);
        }
        let tensors = self.params.tensors();
        put_u32(&mut out, tensors.len() as u32);
        for t in tensors {
            put_u32(&mut out, t.shape().len() as u32);
            for &d in t.shape() {
                put_u32(&mut out, d as u32);
            }
        }
        for t in tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::invalid("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint version {version}")));
        }
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let dropout = r.f64()?;
        let config = ModelConfig {
            num_layers: dims[0],
            num_heads: dims[1],
            embed_dim: dims[2],
            ffn_dim: dims[3],
            vocab_size: dims[4],
            max_positions: dims[5],
            dropout,
        };
        let n_chars = r.u32()? as usize;
        let mut chars = Vec::with_capacity(n_chars);
        for _ in 0..n_chars {
            let cp = r.u32()?;
            chars.push(char::from_u32(cp).ok_or_else(|| Error::invalid(format!("bad code point {cp:#x}")))?);
        }
        let vocab = Vocabulary::from_chars(chars)?;
        let n_tensors = r.u32()? as usize;
        let mut shapes = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            shapes.push(shape);
        }
        let mut tensors = Vec::with_capacity(n_tensors);
        for shape in shapes {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            tensors.push(Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::invalid("trailing bytes after checkpoint"));
        }
        Checkpoint::new(ModelParams::from_tensors(config, tensors)?, vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialised bytes.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::invalid("truncated checkpoint"))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
