//! Parallel word pairs, monolingual word lists, and seeded splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;
use crate::tokenizer::{normalize, raw_len};

/// An aligned (source, target) pair. Either side may contain spaces when one
/// word aligns with several.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParallelExample {
    pub source: String,
    pub target: String,
    /// Zero-based line number in the originating file.
    pub index: usize,
}

impl ParallelExample {
    pub fn new(source: impl Into<String>, target: impl Into<String>, index: usize) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            index,
        }
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.target.clone(), self.source.clone(), self.index)
    }

    /// True when either side aligns more than one word.
    pub fn is_multi_word(&self) -> bool {
        self.source.contains(char::is_whitespace) || self.target.contains(char::is_whitespace)
    }
}

/// Parses `source<TAB>target` lines. Both fields are NFC-normalised.
pub fn parse_parallel(text: &str, origin: &str) -> Result<Vec<ParallelExample>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |msg: &str| Error::Parse {
            path: origin.to_string(),
            line: n + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(err(&format!("expected 2 tab-separated columns, found {}", fields.len())));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(err("empty column"));
        }
        out.push(ParallelExample::new(normalize(fields[0]), normalize(fields[1]), n));
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("{origin}: no examples")));
    }
    Ok(out)
}

pub fn load_parallel(path: impl AsRef<Path>) -> Result<Vec<ParallelExample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_parallel(&text, &path.display().to_string())
}

pub fn parallel_to_tsv(examples: &[ParallelExample]) -> String {
    examples
        .iter()
        .map(|e| format!("{}\t{}\n", e.source, e.target))
        .collect()
}

pub fn save_parallel(path: impl AsRef<Path>, examples: &[ParallelExample]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, parallel_to_tsv(examples)).map_err(|e| Error::io(path, e))
}

/// Train/eval/test partition of a parallel corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<ParallelExample>,
    pub eval: Vec<ParallelExample>,
    pub test: Vec<ParallelExample>,
    pub seed: u64,
}

pub const DEFAULT_HELD_OUT: usize = 50;

/// Draws `n_eval + n_test` examples uniformly without replacement
/// (ChaCha8 partial Fisher-Yates over positions), the first `n_eval` of
/// them forming eval and the rest test. Every subset keeps file order.
pub fn split(examples: &[ParallelExample], seed: u64, n_eval: usize, n_test: usize) -> Result<DataSplit> {
    let held = n_eval + n_test;
    if held >= examples.len() {
        return Err(Error::invalid(format!(
            "cannot hold out {held} of {} examples",
            examples.len()
        )));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = seed::rng(seed);
    let (picked, _) = order.partial_shuffle(&mut rng, held);
    let mut eval_pos = picked[..n_eval].to_vec();
    let mut test_pos = picked[n_eval..].to_vec();
    eval_pos.sort_unstable();
    test_pos.sort_unstable();
    let held_set: HashSet<usize> = picked.iter().copied().collect();

    let take = |pos: &[usize]| pos.iter().map(|&i| examples[i].clone()).collect();
    Ok(DataSplit {
        train: (0..examples.len())
            .filter(|i| !held_set.contains(i))
            .map(|i| examples[i].clone())
            .collect(),
        eval: take(&eval_pos),
        test: take(&test_pos),
        seed,
    })
}

impl DataSplit {
    pub fn swapped(&self) -> Self {
        let swap = |v: &[ParallelExample]| v.iter().map(ParallelExample::swapped).collect();
        Self {
            train: swap(&self.train),
            eval: swap(&self.eval),
            test: swap(&self.test),
            seed: self.seed,
        }
    }

    /// Writes `train.idx`, `eval.idx`, `test.idx` (one line index per line)
    /// and `seed` into `dir`.
    pub fn write_manifest(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        let idx = |v: &[ParallelExample]| v.iter().map(|e| format!("{}\n", e.index)).collect();
        write("train.idx", idx(&self.train))?;
        write("eval.idx", idx(&self.eval))?;
        write("test.idx", idx(&self.test))?;
        write("seed", format!("{}\n", self.seed))
    }
}

/// Endless walk over `items`, visiting each once per epoch in an order
/// drawn afresh (from `seed` and the epoch number) at every epoch start.
#[derive(Debug, Clone)]
pub struct ShuffledEpochs<T> {
    items: Vec<T>,
    seed: u64,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl<T> ShuffledEpochs<T> {
    pub fn new(items: Vec<T>, seed: u64) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("cannot iterate over an empty collection"));
        }
        let mut s = Self {
            order: (0..items.len()).collect(),
            items,
            seed,
            cursor: 0,
            epoch: 0,
        };
        s.reshuffle();
        Ok(s)
    }

    fn reshuffle(&mut self) {
        let mut rng = seed::rng(seed::derive(self.seed, &format!("epoch/{}", self.epoch)));
        self.order.sort_unstable();
        self.order.shuffle(&mut rng);
        self.cursor = 0;
    }

    pub fn epoch_size(&self) -> usize {
        self.items.len()
    }

    /// Zero-based epoch of the next item.
    pub fn epoch(&self) -> usize {
        if self.cursor == self.order.len() {
            self.epoch + 1
        } else {
            self.epoch
        }
    }

    pub fn next_ref(&mut self) -> &T {
        if self.cursor == self.order.len() {
            self.epoch += 1;
            self.reshuffle();
        }
        let item = &self.items[self.order[self.cursor]];
        self.cursor += 1;
        item
    }
}

impl<T: Clone> Iterator for ShuffledEpochs<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        Some(self.next_ref().clone())
    }
}

/// Words of a monolingual corpus, after length filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoWordCorpus {
    pub words: Vec<String>,
    pub source: String,
    /// Tokens dropped for exceeding the length limit.
    pub dropped: usize,
}

/// Splits on Unicode whitespace, keeping punctuation attached. Tokens
/// longer than `max_raw_len` normalised characters are dropped and counted.
/// With `dedup`, only the first occurrence of each word is kept.
pub fn parse_monolingual(text: &str, source: &str, max_raw_len: usize, dedup: bool) -> MonoWordCorpus {
    let mut seen = HashSet::new();
    let mut words = Vec::new();
    let mut dropped = 0;
    for token in text.split_whitespace() {
        if raw_len(token) > max_raw_len {
            dropped += 1;
            continue;
        }
        let word = normalize(token);
        if dedup && !seen.insert(word.clone()) {
            continue;
        }
        words.push(word);
    }
    if words.is_empty() {
        log::warn!("{source}: monolingual corpus is empty");
    }
    MonoWordCorpus {
        words,
        source: source.to_string(),
        dropped,
    }
}

pub fn load_monolingual(path: impl AsRef<Path>, max_raw_len: usize, dedup: bool) -> Result<MonoWordCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_monolingual(&text, &path.display().to_string(), max_raw_len, dedup))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub total: usize,
    pub multi_word: usize,
    pub multi_word_fraction: f64,
    /// Normalised character length -> number of sources with that length.
    pub source_lengths: BTreeMap<usize, usize>,
    pub target_lengths: BTreeMap<usize, usize>,
}

pub fn stats(examples: &[ParallelExample]) -> CorpusStats {
    let mut source_lengths = BTreeMap::new();
    let mut target_lengths = BTreeMap::new();
    for e in examples {
        *source_lengths.entry(raw_len(&e.source)).or_insert(0) += 1;
        *target_lengths.entry(raw_len(&e.target)).or_insert(0) += 1;
    }
    let multi_word = examples.iter().filter(|e| e.is_multi_word()).count();
    CorpusStats {
        total: examples.len(),
        multi_word,
        multi_word_fraction: if examples.is_empty() {
            0.0
        } else {
            multi_word as f64 / examples.len() as f64
        },
        source_lengths,
        target_lengths,
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "examples\t{}", self.total)?;
        writeln!(f, "multi_word\t{}", self.multi_word)?;
        writeln!(f, "multi_word_fraction\t{:.4}", self.multi_word_fraction)?;
        writeln!(f, "length\tsources\ttargets")?;
        let lengths: std::collections::BTreeSet<usize> = self
            .source_lengths
            .keys()
            .chain(self.target_lengths.keys())
            .copied()
            .collect();
        for len in lengths {
            writeln!(
                f,
                "{len}\t{}\t{}",
                self.source_lengths.get(&len).unwrap_or(&0),
                self.target_lengths.get(&len).unwrap_or(&0)
            )?;
        }
        Ok(())
    }
}
