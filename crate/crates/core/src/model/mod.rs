//! Character-level encoder-decoder transformer.
//!
//! Pre-norm layers, learned positional embeddings, GELU feed-forward
//! blocks, and one token-embedding table shared by the encoder input, the
//! decoder input and the output projection.

mod checkpoint;
mod config;
mod decode;
mod forward;
mod params;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::{count_params, ModelConfig, Preset, MAX_ENCODED_LEN};
pub use decode::{beam_decode, decode, greedy_decode, DecodeOptions, Session, Strategy};
pub use forward::{attention_mask, bind, forward, Graph};
pub use params::{param_specs, ModelParams, ParamSpec};

use crate::error::Result;
use crate::tokenizer::{Vocabulary, MAX_RAW_LEN};

/// Word-level transliteration of a string.
pub trait Transliterate {
    fn transliterate(&self, word: &str) -> Result<String>;
}

impl<F> Transliterate for F
where
    F: Fn(&str) -> Result<String>,
{
    fn transliterate(&self, word: &str) -> Result<String> {
        self(word)
    }
}

/// A trained model bundled with its vocabulary and decoding settings.
#[derive(Debug, Clone)]
pub struct Transliterator {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub options: DecodeOptions,
}

impl Transliterator {
    pub fn new(checkpoint: Checkpoint, options: DecodeOptions) -> Self {
        Self {
            params: checkpoint.params,
            vocab: checkpoint.vocab,
            options,
        }
    }
}

impl Transliterate for Transliterator {
    fn transliterate(&self, word: &str) -> Result<String> {
        let ids = self.vocab.encode(word, MAX_RAW_LEN)?;
        let out = decode(&self.params, &ids, &self.options)?;
        self.vocab.decode(&out)
    }
}
