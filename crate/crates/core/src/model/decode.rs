//! Greedy and beam-search decoding.
//!
//! Both decoders re-run the decoder over the whole prefix at every step
//! (sequences are at most 22 tokens). PAD, BOS and MASK are never emitted.
//! The returned ids exclude BOS and the terminating EOS.

use std::cmp::Ordering;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tokenizer::{BOS, EOS, MASK, PAD};

use super::config::ModelConfig;
use super::forward::{bind, Graph};
use super::params::{layout, Layout, ModelParams};

/// Decoding strategy and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Greedy,
    Beam { width: usize, length_penalty: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    pub strategy: Strategy,
    /// Maximum generated tokens, EOS included.
    pub max_len: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Beam {
                width: 5,
                length_penalty: 1.0,
            },
            max_len: crate::tokenizer::MAX_RAW_LEN + 1,
        }
    }
}

fn emittable(id: usize) -> bool {
    !matches!(id, PAD | BOS | MASK)
}

/// Encoder output for one source, reused across decoder steps.
pub struct Session<'p> {
    config: &'p ModelConfig,
    layout: Layout,
    tape: Tape,
    vars: Vec<Var>,
    source: Vec<usize>,
    encoded: Var,
    base_len: usize,
}

impl<'p> Session<'p> {
    pub fn new(params: &'p ModelParams, source: &[usize]) -> Result<Self> {
        let config = params.config();
        let layout = layout(config);
        let mut tape = Tape::no_grad();
        let vars = bind(&mut tape, params, false);
        let encoded = Graph::with_layout(&mut tape, &vars, config, layout.clone(), None).encode(source)?;
        let base_len = tape.len();
        Ok(Self {
            config,
            layout,
            tape,
            vars,
            source: source.to_vec(),
            encoded,
            base_len,
        })
    }

    /// Log-probabilities of the token following `prefix` (which starts
    /// with BOS).
    pub fn next_log_probs(&mut self, prefix: &[usize]) -> Result<Vec<f64>> {
        let logits = Graph::with_layout(&mut self.tape, &self.vars, self.config, self.layout.clone(), None)
            .decode(self.encoded, &self.source, prefix)?;
        let value = self.tape.value(logits);
        let v = self.config.vocab_size;
        let last = &value.data()[(prefix.len() - 1) * v..prefix.len() * v];
        let max = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + last.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let out = last.iter().map(|x| x - lse).collect();
        self.tape.truncate(self.base_len);
        Ok(out)
    }
}

fn check_max_len(config: &ModelConfig, max_len: usize) -> Result<()> {
    if max_len == 0 || max_len > config.max_positions {
        return Err(Error::invalid(format!(
            "max_len {max_len} must be in 1..={}",
            config.max_positions
        )));
    }
    Ok(())
}

/// Emits the arg-max token until EOS or `max_len`. Ties go to the lowest id.
pub fn greedy_decode(params: &ModelParams, source: &[usize], max_len: usize) -> Result<Vec<usize>> {
    check_max_len(params.config(), max_len)?;
    let mut session = Session::new(params, source)?;
    let mut prefix = vec![BOS];
    for _ in 0..max_len {
        let lp = session.next_log_probs(&prefix)?;
        let mut best = None::<(usize, f64)>;
        for (id, &score) in lp.iter().enumerate() {
            if emittable(id) && best.is_none_or(|(_, b)| score > b) {
                best = Some((id, score));
            }
        }
        let (id, _) = best.ok_or_else(|| Error::invalid("no emittable token"))?;
        if id == EOS {
            break;
        }
        prefix.push(id);
    }
    Ok(prefix.split_off(1))
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<usize>,
    log_prob: f64,
}

struct Candidate {
    score: f64,
    parent: usize,
    token: usize,
}

/// Beam search returning the finished hypothesis with the best
/// `log_prob / len^length_penalty`, where `len` counts generated tokens
/// including EOS. Each step expands every live hypothesis by its
/// `beam_width` best tokens and keeps the `beam_width` best non-EOS
/// candidates alive; an EOS candidate finishes a hypothesis only when it
/// ranks within the top `beam_width`. At step `max_len` every candidate
/// finishes. Search stops early once no live hypothesis can still beat the
/// best finished one: extending a hypothesis never raises its log-prob
/// sum `s`, so its final score is at most `s / max_len^length_penalty`.
pub fn beam_decode(
    params: &ModelParams,
    source: &[usize],
    beam_width: usize,
    max_len: usize,
    length_penalty: f64,
) -> Result<Vec<usize>> {
    if beam_width == 0 {
        return Err(Error::invalid("beam width must be at least 1"));
    }
    if !(length_penalty >= 0.0 && length_penalty.is_finite()) {
        return Err(Error::invalid(format!("length penalty must be >= 0, got {length_penalty}")));
    }
    check_max_len(params.config(), max_len)?;
    let mut session = Session::new(params, source)?;
    let mut alive = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    }];
    let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();

    for step in 1..=max_len {
        let mut candidates = Vec::new();
        for (parent, hyp) in alive.iter().enumerate() {
            let mut prefix = Vec::with_capacity(hyp.tokens.len() + 1);
            prefix.push(BOS);
            prefix.extend_from_slice(&hyp.tokens);
            let lp = session.next_log_probs(&prefix)?;
            let mut ids: Vec<usize> = (0..lp.len()).filter(|&id| emittable(id)).collect();
            ids.sort_by(|&a, &b| lp[b].partial_cmp(&lp[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
            ids.truncate(beam_width);
            candidates.extend(ids.into_iter().map(|token| Candidate {
                score: hyp.log_prob + lp[token],
                parent,
                token,
            }));
        }
        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then(a.parent.cmp(&b.parent))
                .then(a.token.cmp(&b.token))
        });

        let last = step == max_len;
        let mut next = Vec::new();
        for (rank, c) in candidates.iter().enumerate() {
            let parent = &alive[c.parent];
            if c.token == EOS {
                if rank < beam_width || last {
                    let len = parent.tokens.len() + 1;
                    finished.push((parent.tokens.clone(), normalize(c.score, len, length_penalty)));
                }
                continue;
            }
            let mut tokens = parent.tokens.clone();
            tokens.push(c.token);
            if last {
                let len = tokens.len();
                finished.push((tokens, normalize(c.score, len, length_penalty)));
            } else if next.len() < beam_width {
                next.push(Hypothesis {
                    tokens,
                    log_prob: c.score,
                });
            }
        }
        alive = next;
        let best_finished = finished.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        let ceiling = alive
            .iter()
            .map(|h| normalize(h.log_prob, max_len, length_penalty))
            .fold(f64::NEG_INFINITY, f64::max);
        if alive.is_empty() || ceiling <= best_finished {
            break;
        }
    }

    let mut best: Option<&(Vec<usize>, f64)> = None;
    for f in &finished {
        if best.is_none_or(|b| f.1 > b.1) {
            best = Some(f);
        }
    }
    Ok(best.map(|b| b.0.clone()).unwrap_or_default())
}

fn normalize(log_prob: f64, len: usize, length_penalty: f64) -> f64 {
    if length_penalty == 0.0 {
        log_prob
    } else {
        log_prob / (len as f64).powf(length_penalty)
    }
}

/// Dispatches on `opts.strategy`.
pub fn decode(params: &ModelParams, source: &[usize], opts: &DecodeOptions) -> Result<Vec<usize>> {
    match opts.strategy {
        Strategy::Greedy => greedy_decode(params, source, opts.max_len),
        Strategy::Beam {
            width,
            length_penalty,
        } => beam_decode(params, source, width, opts.max_len, length_penalty),
    }
}
