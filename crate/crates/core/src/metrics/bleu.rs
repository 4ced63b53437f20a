//! Character BLEU-4.
//!
//! Strings are compared as sequences of Unicode scalar values after NFC;
//! spaces are ordinary characters. Orders with no hypothesis n-grams at all
//! (every hypothesis shorter than n) are left out of the geometric mean,
//! unless smoothing assigns them a value.

use std::collections::HashMap;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Any zero precision makes the score zero.
    #[default]
    None,
    /// An order with no matches gets precision `1 / (total + 1)`.
    AddOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    /// 0 to 100.
    pub score: f64,
    /// Per-order precision after smoothing, n = 1..=4.
    pub precisions: [f64; MAX_ORDER],
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

impl Counts {
    fn add(&mut self, other: &Counts) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut out = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

fn pair_counts(hyp: &str, reference: &str) -> Counts {
    let h: Vec<char> = hyp.nfc().collect();
    let r: Vec<char> = reference.nfc().collect();
    let mut c = Counts {
        hyp_len: h.len(),
        ref_len: r.len(),
        ..Counts::default()
    };
    for n in 1..=MAX_ORDER {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        c.totals[n - 1] = h.len().saturating_sub(n - 1);
        c.matches[n - 1] = hc
            .iter()
            .map(|(g, &k)| k.min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    c
}

fn score(c: &Counts, smoothing: Smoothing) -> BleuScore {
    let mut precisions = [0.0; MAX_ORDER];
    let mut log_sum = 0.0;
    let mut orders = 0;
    let mut zero = false;
    for n in 0..MAX_ORDER {
        let (m, t) = (c.matches[n], c.totals[n]);
        let p = match (smoothing, m) {
            (Smoothing::AddOne, 0) => 1.0 / (t + 1) as f64,
            (Smoothing::None, _) if t == 0 => {
                precisions[n] = 0.0;
                continue;
            }
            _ => m as f64 / t as f64,
        };
        precisions[n] = p;
        if p == 0.0 {
            zero = true;
        } else {
            log_sum += p.ln();
        }
        orders += 1;
    }
    let brevity_penalty = if c.hyp_len == 0 {
        if c.ref_len == 0 {
            1.0
        } else {
            0.0
        }
    } else if c.hyp_len > c.ref_len {
        1.0
    } else {
        (1.0 - c.ref_len as f64 / c.hyp_len as f64).exp()
    };
    let score = if c.hyp_len == 0 {
        if c.ref_len == 0 {
            100.0
        } else {
            0.0
        }
    } else if zero || orders == 0 {
        0.0
    } else {
        100.0 * brevity_penalty * (log_sum / orders as f64).exp()
    };
    BleuScore {
        score,
        precisions,
        matches: c.matches,
        totals: c.totals,
        brevity_penalty,
        hyp_len: c.hyp_len,
        ref_len: c.ref_len,
    }
}

/// Corpus BLEU: n-gram statistics and lengths are summed over all pairs
/// before the precisions and brevity penalty are taken.
pub fn corpus_bleu<H, R>(hyps: &[H], refs: &[R], smoothing: Smoothing) -> Result<BleuScore>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hyps.len() != refs.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses but {} references",
            hyps.len(),
            refs.len()
        )));
    }
    let mut total = Counts::default();
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&pair_counts(h.as_ref(), r.as_ref()));
    }
    Ok(score(&total, smoothing))
}

/// Unsmoothed corpus character BLEU.
pub fn char_bleu_corpus<H, R>(hyps: &[H], refs: &[R]) -> Result<BleuScore>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    corpus_bleu(hyps, refs, Smoothing::None)
}

pub fn char_bleu_sentence(hyp: &str, reference: &str, smoothing: Smoothing) -> BleuScore {
    score(&pair_counts(hyp, reference), smoothing)
}
