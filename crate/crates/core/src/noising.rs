//! Span-infilling corruption for denoising pretraining.
//!
//! A corruption budget of `mask_ratio * n` interior characters (rounded
//! stochastically, so the expected budget is exact for every length) is cut
//! into spans whose lengths are geometric with mean `mean_span`, truncated
//! to what is left of the budget. Spans are placed without overlap and with
//! at least one untouched character between neighbours; each becomes a
//! single MASK, or disappears with probability `delete_prob`.

use std::ops::Range;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::corpus::{MonoWordCorpus, ShuffledEpochs};
use crate::error::{Error, Result};
use crate::seed;
use crate::tokenizer::{Vocabulary, MASK, MAX_RAW_LEN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub mask_ratio: f64,
    /// `f64::INFINITY` puts the whole budget in one span.
    pub mean_span: f64,
    pub delete_prob: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            mask_ratio: 0.3,
            mean_span: 3.0,
            delete_prob: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(Error::invalid(format!("mask_ratio {} not in [0, 1]", self.mask_ratio)));
        }
        if !(0.0..=1.0).contains(&self.delete_prob) {
            return Err(Error::invalid(format!("delete_prob {} not in [0, 1]", self.delete_prob)));
        }
        if self.mean_span.is_nan() || self.mean_span < 1.0 {
            return Err(Error::invalid(format!("mean_span {} must be >= 1", self.mean_span)));
        }
        Ok(())
    }
}

/// Result of [`corrupt`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub noisy: Vec<usize>,
    pub clean: Vec<usize>,
    /// Corrupted positions of `clean`, in order.
    pub spans: Vec<Range<usize>>,
}

impl Corruption {
    pub fn corrupted_chars(&self) -> usize {
        self.spans.iter().map(|s| s.len()).sum()
    }
}

/// Corrupts the interior of an encoded word `[BOS, .., EOS]`. The clean
/// copy is returned unchanged as the reconstruction target.
pub fn corrupt(word_ids: &[usize], cfg: &NoiseConfig, rng: &mut ChaCha8Rng) -> Corruption {
    let clean = word_ids.to_vec();
    let n = word_ids.len().saturating_sub(2);
    let spans = choose_spans(n, cfg, rng);
    let mut noisy = Vec::with_capacity(word_ids.len());
    let mut next = 0;
    let shift = |r: &Range<usize>| r.start + 1..r.end + 1;
    for span in spans.iter().map(shift) {
        noisy.extend_from_slice(&word_ids[next..span.start]);
        if cfg.delete_prob == 0.0 || rng.gen::<f64>() >= cfg.delete_prob {
            noisy.push(MASK);
        }
        next = span.end;
    }
    noisy.extend_from_slice(&word_ids[next..]);
    let spans = spans.iter().map(shift).collect();
    Corruption { noisy, clean, spans }
}

/// Spans over `0..n`, sorted, disjoint, pairwise separated by at least one
/// position.
fn choose_spans(n: usize, cfg: &NoiseConfig, rng: &mut ChaCha8Rng) -> Vec<Range<usize>> {
    let exact = cfg.mask_ratio * n as f64;
    let mut budget = exact.floor() as usize;
    let frac = exact - exact.floor();
    if frac > 0.0 && rng.gen::<f64>() < frac {
        budget += 1;
    }
    let budget = budget.min(n);
    if budget == 0 {
        return Vec::new();
    }

    let mut lengths = Vec::new();
    let mut left = budget;
    let geometric = cfg
        .mean_span
        .is_finite()
        .then(|| Geometric::new(1.0 / cfg.mean_span).expect("mean_span >= 1"));
    while left > 0 {
        let len = match &geometric {
            Some(g) => (1 + g.sample(rng) as usize).min(left),
            None => left,
        };
        lengths.push(len);
        left -= len;
    }

    // Between m spans we need m - 1 separators; merge spans until they fit.
    let free = n - budget;
    while lengths.len() > 1 && lengths.len() - 1 > free {
        let last = lengths.pop().expect("len > 1");
        *lengths.last_mut().expect("len > 0") += last;
    }
    lengths.shuffle(rng);

    // Stars and bars: after reserving the separators, spread the spare
    // free positions uniformly over the m + 1 gaps. With sorted bars b_i,
    // the gap before span 0 is b_0 and before span i it is b_i - b_{i-1}
    // (the reserved separator included).
    let m = lengths.len();
    let spare = free + 1 - m;
    let mut bars: Vec<usize> = index::sample(rng, spare + m, m).into_vec();
    bars.sort_unstable();
    let mut spans = Vec::with_capacity(m);
    let mut pos = 0;
    let mut prev: Option<usize> = None;
    for (&bar, &len) in bars.iter().zip(&lengths) {
        pos += prev.map_or(bar, |p| bar - p);
        spans.push(pos..pos + len);
        pos += len;
        prev = Some(bar);
    }
    spans
}

/// Endless stream of `(noisy, clean)` pairs over a monolingual corpus, one
/// word per item. Each epoch visits every word once in a fresh order; the
/// word order and the corruptions come from separate seeds derived from
/// `seed`.
pub struct PretrainStream {
    words: ShuffledEpochs<Vec<usize>>,
    cfg: NoiseConfig,
    noise: ChaCha8Rng,
}

impl PretrainStream {
    pub fn new(corpus: &MonoWordCorpus, vocab: &Vocabulary, cfg: NoiseConfig, seed: u64) -> Result<Self> {
        if corpus.words.is_empty() {
            return Err(Error::invalid(format!("{}: no words to pretrain on", corpus.source)));
        }
        let words = corpus
            .words
            .iter()
            .map(|w| vocab.encode(w, MAX_RAW_LEN))
            .collect::<Result<Vec<_>>>()?;
        Self::from_encoded(words, cfg, seed)
    }

    pub fn from_encoded(words: Vec<Vec<usize>>, cfg: NoiseConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            words: ShuffledEpochs::new(words, seed::derive(seed, "shuffle"))?,
            noise: seed::rng(seed::derive(seed, "noise")),
            cfg,
        })
    }

    /// Words per epoch.
    pub fn epoch_size(&self) -> usize {
        self.words.epoch_size()
    }

    /// Zero-based index of the epoch the next item comes from.
    pub fn epoch(&self) -> usize {
        self.words.epoch()
    }
}

impl Iterator for PretrainStream {
    type Item = (Vec<usize>, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        let word = self.words.next_ref();
        let c = corrupt(word, &self.cfg, &mut self.noise);
        Some((c.noisy, c.clean))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{BOS, EOS};

    fn word(n: usize) -> Vec<usize> {
        let mut w = vec![BOS];
        w.extend((0..n).map(|i| 5 + i % 7));
        w.push(EOS);
        w
    }

    #[test]
    fn zero_ratio_is_identity() {
        let mut rng = seed::rng(1);
        let cfg = NoiseConfig {
            mask_ratio: 0.0,
            ..Default::default()
        };
        let w = word(9);
        let c = corrupt(&w, &cfg, &mut rng);
        assert_eq!(c.noisy, w);
        assert_eq!(c.clean, w);
        assert!(c.spans.is_empty());
    }

    #[test]
    fn full_ratio_single_span() {
        let mut rng = seed::rng(1);
        let cfg = NoiseConfig {
            mask_ratio: 1.0,
            mean_span: f64::INFINITY,
            delete_prob: 0.0,
        };
        let c = corrupt(&word(8), &cfg, &mut rng);
        assert_eq!(c.noisy, vec![BOS, MASK, EOS]);
        assert_eq!(c.spans, vec![1..9]);
    }

    #[test]
    fn full_ratio_short_spans_merge() {
        // No room for separators, so every span collapses into one.
        let mut rng = seed::rng(2);
        let cfg = NoiseConfig {
            mask_ratio: 1.0,
            mean_span: 1.0,
            delete_prob: 0.0,
        };
        let c = corrupt(&word(6), &cfg, &mut rng);
        assert_eq!(c.noisy, vec![BOS, MASK, EOS]);
    }

    #[test]
    fn deletion_removes_spans() {
        let mut rng = seed::rng(3);
        let cfg = NoiseConfig {
            mask_ratio: 0.5,
            mean_span: 2.0,
            delete_prob: 1.0,
        };
        let w = word(10);
        let c = corrupt(&w, &cfg, &mut rng);
        assert!(!c.noisy.contains(&MASK));
        assert_eq!(c.noisy.len(), w.len() - c.corrupted_chars());
    }

    #[test]
    fn spans_are_separated() {
        let mut rng = seed::rng(4);
        let cfg = NoiseConfig {
            mask_ratio: 0.45,
            mean_span: 1.5,
            delete_prob: 0.0,
        };
        for _ in 0..500 {
            let c = corrupt(&word(11), &cfg, &mut rng);
            for pair in c.spans.windows(2) {
                assert!(pair[0].end < pair[1].start, "{:?}", c.spans);
            }
            assert!(c.spans.iter().all(|s| s.start >= 1 && s.end <= 12 && !s.is_empty()));
        }
    }

    #[test]
    fn config_validation() {
        assert!(NoiseConfig::default().validate().is_ok());
        for bad in [
            NoiseConfig { mask_ratio: 1.5, ..Default::default() },
            NoiseConfig { delete_prob: -0.1, ..Default::default() },
            NoiseConfig { mean_span: 0.5, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn stream_epochs_and_determinism() {
        let words = vec![word(3), word(4), word(5)];
        let a: Vec<_> = PretrainStream::from_encoded(words.clone(), NoiseConfig::default(), 9)
            .unwrap()
            .take(20)
            .collect();
        let b: Vec<_> = PretrainStream::from_encoded(words.clone(), NoiseConfig::default(), 9)
            .unwrap()
            .take(20)
            .collect();
        assert_eq!(a, b);
        // Each epoch covers every word once.
        for epoch in a.chunks(3).take(6) {
            let mut lens: Vec<usize> = epoch.iter().map(|(_, c)| c.len()).collect();
            lens.sort();
            assert_eq!(lens, vec![5, 6, 7]);
        }
        let mut s = PretrainStream::from_encoded(words, NoiseConfig::default(), 9).unwrap();
        s.by_ref().take(2).for_each(drop);
        assert_eq!(s.epoch(), 0);
        s.next();
        assert_eq!(s.epoch(), 1);
        assert_eq!(s.epoch_size(), 3);
    }

    #[test]
    fn single_word_stream_varies() {
        let mut s = PretrainStream::from_encoded(vec![word(12)], NoiseConfig::default(), 5).unwrap();
        let items: Vec<_> = s.by_ref().take(30).collect();
        assert!(items.iter().all(|(_, c)| *c == word(12)));
        assert!(items.iter().any(|(n, _)| *n != items[0].0));
    }

    #[test]
    fn empty_corpus_rejected() {
        let corpus = MonoWordCorpus {
            words: vec![],
            source: "x".into(),
            dropped: 0,
        };
        let vocab = Vocabulary::build(["a"]).unwrap();
        assert!(PretrainStream::new(&corpus, &vocab, NoiseConfig::default(), 0).is_err());
    }
}
