//! Pre-norm encoder-decoder forward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tokenizer::PAD;

use super::config::ModelConfig;
use super::params::{layout, Attention, FeedForward, Layout, Linear, ModelParams, Norm};

const NORM_EPS: f64 = 1e-5;

/// Records every parameter of `params` on `tape`, trainable or constant.
pub fn bind(tape: &mut Tape, params: &ModelParams, trainable: bool) -> Vec<Var> {
    params
        .tensors()
        .iter()
        .map(|t| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        })
        .collect()
}

/// Builds the computation for one (source, target) pair on a tape whose
/// parameters have already been bound.
pub struct Graph<'a> {
    tape: &'a mut Tape,
    vars: &'a [Var],
    config: ModelConfig,
    layout: Layout,
    dropout: Option<&'a mut ChaCha8Rng>,
}

impl<'a> Graph<'a> {
    /// `dropout` supplies the mask RNG in training mode; `None` evaluates
    /// deterministically.
    pub fn new(
        tape: &'a mut Tape,
        vars: &'a [Var],
        config: &ModelConfig,
        dropout: Option<&'a mut ChaCha8Rng>,
    ) -> Self {
        Self::with_layout(tape, vars, config, layout(config), dropout)
    }

    pub(crate) fn with_layout(
        tape: &'a mut Tape,
        vars: &'a [Var],
        config: &ModelConfig,
        layout: Layout,
        dropout: Option<&'a mut ChaCha8Rng>,
    ) -> Self {
        Self {
            tape,
            vars,
            config: *config,
            layout,
            dropout,
        }
    }

    pub fn tape(&mut self) -> &mut Tape {
        self.tape
    }

    fn check_ids(&self, what: &str, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::invalid(format!("empty {what} sequence")));
        }
        if ids.len() > self.config.max_positions {
            return Err(Error::invalid(format!(
                "{what} length {} exceeds max_positions {}",
                ids.len(),
                self.config.max_positions
            )));
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(Error::Index {
                what: "vocabulary",
                index: id,
                size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Encoder states `[L_s x d]`.
    pub fn encode(&mut self, source: &[usize]) -> Result<Var> {
        self.check_ids("source", source)?;
        let mut x = self.embed(source, self.layout.enc_positions)?;
        let mask = self.tape_mask(source.len(), source, false);
        for l in 0..self.layout.encoder.len() {
            let layer = self.layout.encoder[l];
            let h = self.norm(x, layer.self_norm)?;
            let h = self.attention(&layer.self_attn, h, h, mask)?;
            x = self.residual(x, h)?;
            let h = self.norm(x, layer.ffn_norm)?;
            let h = self.ffn(&layer.ffn, h)?;
            x = self.residual(x, h)?;
        }
        self.norm(x, self.layout.enc_norm)
    }

    /// Next-token logits `[L_t x V]` for every position of `target_in`
    /// (the target shifted right, starting with BOS).
    pub fn decode(&mut self, encoded: Var, source: &[usize], target_in: &[usize]) -> Result<Var> {
        self.check_ids("target", target_in)?;
        let mut x = self.embed(target_in, self.layout.dec_positions)?;
        let self_mask = self.tape_mask(target_in.len(), target_in, true);
        let cross_mask = self.tape_mask(target_in.len(), source, false);
        for l in 0..self.layout.decoder.len() {
            let layer = self.layout.decoder[l];
            let h = self.norm(x, layer.self_norm)?;
            let h = self.attention(&layer.self_attn, h, h, self_mask)?;
            x = self.residual(x, h)?;
            let h = self.norm(x, layer.cross_norm)?;
            let h = self.attention(&layer.cross_attn, h, encoded, cross_mask)?;
            x = self.residual(x, h)?;
            let h = self.norm(x, layer.ffn_norm)?;
            let h = self.ffn(&layer.ffn, h)?;
            x = self.residual(x, h)?;
        }
        let x = self.norm(x, self.layout.dec_norm)?;
        let tokens_t = self.tape.transpose(self.vars[self.layout.tokens])?;
        self.tape.matmul(x, tokens_t)
    }

    /// Encode then decode.
    pub fn logits(&mut self, source: &[usize], target_in: &[usize]) -> Result<Var> {
        let enc = self.encode(source)?;
        self.decode(enc, source, target_in)
    }

    /// Teacher-forced cross-entropy of `target` (`[BOS, .., EOS]`): the
    /// decoder reads `target[..n-1]` and predicts `target[1..]`.
    pub fn loss(&mut self, source: &[usize], target: &[usize]) -> Result<Var> {
        if target.len() < 2 {
            return Err(Error::invalid("target needs at least BOS and EOS"));
        }
        let logits = self.logits(source, &target[..target.len() - 1])?;
        self.tape.cross_entropy(logits, &target[1..], PAD)
    }

    fn embed(&mut self, ids: &[usize], positions: usize) -> Result<Var> {
        let tok = self.tape.embedding(self.vars[self.layout.tokens], ids)?;
        let pos_ids: Vec<usize> = (0..ids.len()).collect();
        let pos = self.tape.embedding(self.vars[positions], &pos_ids)?;
        let x = self.tape.add(tok, pos)?;
        self.dropout(x)
    }

    fn residual(&mut self, x: Var, h: Var) -> Result<Var> {
        let h = self.dropout(h)?;
        self.tape.add(x, h)
    }

    fn norm(&mut self, x: Var, n: Norm) -> Result<Var> {
        self.tape
            .layer_norm(x, self.vars[n.gain], self.vars[n.bias], NORM_EPS)
    }

    fn linear(&mut self, x: Var, l: Linear) -> Result<Var> {
        let y = self.tape.matmul(x, self.vars[l.w])?;
        self.tape.add_row(y, self.vars[l.b])
    }

    fn ffn(&mut self, f: &FeedForward, x: Var) -> Result<Var> {
        let h = self.linear(x, f.fc1)?;
        let h = self.tape.gelu(h);
        self.linear(h, f.fc2)
    }

    fn attention(&mut self, a: &Attention, xq: Var, xkv: Var, mask: Option<Var>) -> Result<Var> {
        let q = self.linear(xq, a.q)?;
        let k = self.linear(xkv, a.k)?;
        let v = self.linear(xkv, a.v)?;
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.config.num_heads);
        for h in 0..self.config.num_heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = self.tape.slice_cols(q, lo, hi)?;
            let kh = self.tape.slice_cols(k, lo, hi)?;
            let vh = self.tape.slice_cols(v, lo, hi)?;
            let kht = self.tape.transpose(kh)?;
            let scores = self.tape.matmul(qh, kht)?;
            let mut scores = self.tape.scale(scores, scale);
            if let Some(m) = mask {
                scores = self.tape.add(scores, m)?;
            }
            let weights = self.tape.softmax(scores, 1)?;
            heads.push(self.tape.matmul(weights, vh)?);
        }
        let joined = if heads.len() == 1 {
            heads[0]
        } else {
            self.tape.concat_cols(&heads)?
        };
        self.linear(joined, a.o)
    }

    fn dropout(&mut self, x: Var) -> Result<Var> {
        let p = self.config.dropout;
        let Some(rng) = self.dropout.as_deref_mut() else {
            return Ok(x);
        };
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let shape = self.tape.shape(x).to_vec();
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let m = self.tape.constant(Tensor::new(shape, data)?);
        self.tape.mul(x, m)
    }

    fn tape_mask(&mut self, queries: usize, keys: &[usize], causal: bool) -> Option<Var> {
        attention_mask(queries, keys, causal).map(|m| self.tape.constant(m))
    }
}

/// Additive attention mask `[queries x keys]`: `-inf` where the key is
/// padding or (when `causal`) lies after the query, zero elsewhere. `None`
/// when nothing is masked.
pub fn attention_mask(queries: usize, keys: &[usize], causal: bool) -> Option<Tensor> {
    let mut any = false;
    let mut data = vec![0.0; queries * keys.len()];
    for i in 0..queries {
        for (j, &key) in keys.iter().enumerate() {
            if key == PAD || (causal && j > i) {
                data[i * keys.len() + j] = f64::NEG_INFINITY;
                any = true;
            }
        }
    }
    any.then(|| Tensor::new([queries, keys.len()], data).expect("mask shape"))
}

/// Evaluation-mode logits `[L_t x V]`.
pub fn forward(params: &ModelParams, source: &[usize], target_in: &[usize]) -> Result<Tensor> {
    let mut tape = Tape::no_grad();
    let vars = bind(&mut tape, params, false);
    let mut g = Graph::new(&mut tape, &vars, params.config(), None);
    let logits = g.logits(source, target_in)?;
    Ok(tape.value(logits).clone())
}
