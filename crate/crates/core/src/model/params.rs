//! Parameter shapes, their fixed order, and initialisation.
//!
//! Order (also the checkpoint order):
//!
//! 1. `embed.tokens [V x d]` (shared by encoder input, decoder input and the
//!    output projection)
//! 2. `encoder.positions [P x d]`, `decoder.positions [P x d]`
//! 3. per encoder layer: self-attention (`q k v o`, weight then bias), its
//!    pre-norm, feed-forward (`fc1`, `fc2`), its pre-norm
//! 4. `encoder.final_norm`
//! 5. per decoder layer: self-attention, pre-norm, cross-attention,
//!    pre-norm, feed-forward, pre-norm
//! 6. `decoder.final_norm`
//!
//! Weights are stored `[in x out]` so a layer computes `x W + b`.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Tensor;

use super::config::ModelConfig;

const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Init {
    Normal,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub(crate) init: Init,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Norm {
    pub gain: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FeedForward {
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EncoderLayer {
    pub self_norm: Norm,
    pub self_attn: Attention,
    pub ffn_norm: Norm,
    pub ffn: FeedForward,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DecoderLayer {
    pub self_norm: Norm,
    pub self_attn: Attention,
    pub cross_norm: Norm,
    pub cross_attn: Attention,
    pub ffn_norm: Norm,
    pub ffn: FeedForward,
}

/// Indices of each parameter within the flat ordered list.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub tokens: usize,
    pub enc_positions: usize,
    pub dec_positions: usize,
    pub encoder: Vec<EncoderLayer>,
    pub enc_norm: Norm,
    pub decoder: Vec<DecoderLayer>,
    pub dec_norm: Norm,
}

struct Builder<'a> {
    cfg: &'a ModelConfig,
    specs: Vec<ParamSpec>,
}

impl Builder<'_> {
    fn push(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.specs.push(ParamSpec { name, shape, init });
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.push(format!("{prefix}.weight"), vec![fan_in, fan_out], Init::Normal),
            b: self.push(format!("{prefix}.bias"), vec![fan_out], Init::Zeros),
        }
    }

    fn norm(&mut self, prefix: &str) -> Norm {
        let d = self.cfg.embed_dim;
        Norm {
            gain: self.push(format!("{prefix}.gain"), vec![d], Init::Ones),
            bias: self.push(format!("{prefix}.bias"), vec![d], Init::Zeros),
        }
    }

    fn attention(&mut self, prefix: &str) -> Attention {
        let d = self.cfg.embed_dim;
        Attention {
            q: self.linear(&format!("{prefix}.q"), d, d),
            k: self.linear(&format!("{prefix}.k"), d, d),
            v: self.linear(&format!("{prefix}.v"), d, d),
            o: self.linear(&format!("{prefix}.o"), d, d),
        }
    }

    fn ffn(&mut self, prefix: &str) -> FeedForward {
        let (d, f) = (self.cfg.embed_dim, self.cfg.ffn_dim);
        FeedForward {
            fc1: self.linear(&format!("{prefix}.fc1"), d, f),
            fc2: self.linear(&format!("{prefix}.fc2"), f, d),
        }
    }
}

fn build(cfg: &ModelConfig) -> (Vec<ParamSpec>, Layout) {
    let mut b = Builder {
        cfg,
        specs: Vec::new(),
    };
    let (v, d, p) = (cfg.vocab_size, cfg.embed_dim, cfg.max_positions);
    let tokens = b.push("embed.tokens".into(), vec![v, d], Init::Normal);
    let enc_positions = b.push("encoder.positions".into(), vec![p, d], Init::Normal);
    let dec_positions = b.push("decoder.positions".into(), vec![p, d], Init::Normal);
    let encoder = (0..cfg.num_layers)
        .map(|l| {
            let pre = format!("encoder.layers.{l}");
            let self_attn = b.attention(&format!("{pre}.self_attn"));
            let self_norm = b.norm(&format!("{pre}.self_attn_norm"));
            let ffn = b.ffn(&format!("{pre}.ffn"));
            let ffn_norm = b.norm(&format!("{pre}.ffn_norm"));
            EncoderLayer {
                self_norm,
                self_attn,
                ffn_norm,
                ffn,
            }
        })
        .collect();
    let enc_norm = b.norm("encoder.final_norm");
    let decoder = (0..cfg.num_layers)
        .map(|l| {
            let pre = format!("decoder.layers.{l}");
            let self_attn = b.attention(&format!("{pre}.self_attn"));
            let self_norm = b.norm(&format!("{pre}.self_attn_norm"));
            let cross_attn = b.attention(&format!("{pre}.cross_attn"));
            let cross_norm = b.norm(&format!("{pre}.cross_attn_norm"));
            let ffn = b.ffn(&format!("{pre}.ffn"));
            let ffn_norm = b.norm(&format!("{pre}.ffn_norm"));
            DecoderLayer {
                self_norm,
                self_attn,
                cross_norm,
                cross_attn,
                ffn_norm,
                ffn,
            }
        })
        .collect();
    let dec_norm = b.norm("decoder.final_norm");
    let layout = Layout {
        tokens,
        enc_positions,
        dec_positions,
        encoder,
        enc_norm,
        decoder,
        dec_norm,
    };
    (b.specs, layout)
}

/// Names and shapes of every learned tensor, in checkpoint order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    build(cfg).0
}

pub(crate) fn layout(cfg: &ModelConfig) -> Layout {
    build(cfg).1
}

/// Learned weights of an encoder-decoder, in the fixed order of
/// [`param_specs`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    /// Normal(0, 0.02) for embeddings and projection weights, zeros for
    /// biases and norm offsets, ones for norm gains.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut rng = seed::rng(seed);
        let specs = param_specs(&config);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for spec in specs {
            let t = match spec.init {
                Init::Zeros => Tensor::zeros(spec.shape),
                Init::Ones => Tensor::full(spec.shape, 1.0),
                Init::Normal => {
                    let n = spec.shape.iter().product();
                    let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
                    Tensor::new(spec.shape, data)?
                }
            };
            names.push(spec.name);
            tensors.push(t);
        }
        Ok(Self {
            config,
            names,
            tensors,
        })
    }

    /// Wraps existing tensors, checking them against `config`'s shapes.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != tensors.len() {
            return Err(Error::invalid(format!(
                "expected {} parameter tensors, got {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (s, t) in specs.iter().zip(&tensors) {
            if s.shape != t.shape() {
                return Err(Error::Shape {
                    op: "parameter",
                    lhs: s.shape.clone(),
                    rhs: t.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            config,
            names: specs.into_iter().map(|s| s.name).collect(),
            tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}
