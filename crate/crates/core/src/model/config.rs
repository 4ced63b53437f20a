use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tokenizer::MAX_RAW_LEN;

/// Longest encoded sequence: the raw-length limit plus BOS and EOS.
pub const MAX_ENCODED_LEN: usize = MAX_RAW_LEN + 2;

/// Named architecture sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 2 layers, 2 heads, 64-dim embeddings.
    Tiny,
    /// 6 layers, 12 heads, 768-dim embeddings.
    Base,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Preset::Tiny),
            "base" => Ok(Preset::Base),
            _ => Err(Error::invalid(format!("unknown preset `{s}` (expected tiny or base)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Tiny => "tiny",
            Preset::Base => "base",
        })
    }
}

/// Encoder-decoder hyperparameters. Encoder and decoder share depth, width
/// and head count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn preset(preset: Preset, vocab_size: usize) -> Self {
        let (num_layers, num_heads, embed_dim, ffn_dim) = match preset {
            Preset::Tiny => (2, 2, 64, 64),
            Preset::Base => (6, 12, 768, 3072),
        };
        Self {
            num_layers,
            num_heads,
            embed_dim,
            ffn_dim,
            vocab_size,
            max_positions: MAX_ENCODED_LEN,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("invalid model config: {m}")));
        if self.vocab_size == 0 {
            return bad("vocab_size is 0".into());
        }
        if self.num_layers == 0 || self.num_heads == 0 || self.embed_dim == 0 || self.ffn_dim == 0 {
            return bad(format!("{self:?} has a zero dimension"));
        }
        if self.embed_dim % self.num_heads != 0 {
            return bad(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        if self.max_positions < MAX_ENCODED_LEN {
            return bad(format!(
                "max_positions {} below encoded length {MAX_ENCODED_LEN}",
                self.max_positions
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }
}

/// Exact number of learned parameters for `config`.
pub fn count_params(config: &ModelConfig) -> Result<usize> {
    config.validate()?;
    Ok(super::params::param_specs(config)
        .iter()
        .map(|s| s.shape.iter().product::<usize>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_published_sizes() {
        let t = ModelConfig::preset(Preset::Tiny, 40);
        assert_eq!((t.num_layers, t.num_heads, t.embed_dim), (2, 2, 64));
        let b = ModelConfig::preset(Preset::Base, 40);
        assert_eq!((b.num_layers, b.num_heads, b.embed_dim), (6, 12, 768));
        assert!(t.validate().is_ok() && b.validate().is_ok());
        assert!(t.max_positions >= 22);
    }

    #[test]
    fn invalid_configs() {
        let mut c = ModelConfig::preset(Preset::Tiny, 0);
        assert!(count_params(&c).is_err());
        c.vocab_size = 10;
        c.num_heads = 3;
        assert!(c.validate().is_err());
        c.num_heads = 2;
        c.max_positions = 21;
        assert!(c.validate().is_err());
    }

    #[test]
    fn base_is_larger() {
        let t = count_params(&ModelConfig::preset(Preset::Tiny, 60)).unwrap();
        let b = count_params(&ModelConfig::preset(Preset::Base, 60)).unwrap();
        assert!(b > t);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in [Preset::Tiny, Preset::Base] {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert!("huge".parse::<Preset>().is_err());
    }
}
