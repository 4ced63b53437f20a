//! Character vocabulary with reserved special tokens.
//!
//! Text is NFC-normalised and split into Unicode scalar values. Combining
//! marks that survive composition (superscript letters, stray macrons in
//! the manuscript transcription) are vocabulary entries of their own.

use std::collections::HashMap;
use std::fmt::Write as _;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const MASK: usize = 4;

pub const SPECIALS: [&str; 5] = ["[PAD]", "[BOS]", "[EOS]", "[UNK]", "[MASK]"];

/// Longest word, in normalised characters, that [`Vocabulary::encode`] accepts.
pub const MAX_RAW_LEN: usize = 20;

/// Canonical composition (NFC).
pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

/// Number of characters in the normalised form of `text`.
pub fn raw_len(text: &str) -> usize {
    text.nfc().count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    /// Assigns ids to every character in `corpora` in order of first
    /// occurrence, after the five special tokens.
    pub fn build<I, S>(corpora: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        let mut saw_text = false;
        for text in corpora {
            for c in text.as_ref().nfc() {
                saw_text = true;
                vocab.insert(c);
            }
        }
        if !saw_text {
            return Err(Error::invalid("cannot build a vocabulary from empty corpora"));
        }
        Ok(vocab)
    }

    /// Vocabulary whose non-special entries are exactly `chars`, in order.
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let mut vocab = Self {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        for c in chars {
            if vocab.index.contains_key(&c) {
                return Err(Error::invalid(format!("duplicate vocabulary entry {:04X}", c as u32)));
            }
            vocab.insert(c);
        }
        Ok(vocab)
    }

    fn insert(&mut self, c: char) {
        if !self.index.contains_key(&c) {
            self.index.insert(c, SPECIALS.len() + self.chars.len());
            self.chars.push(c);
        }
    }

    pub fn len(&self) -> usize {
        SPECIALS.len() + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Non-special characters in id order.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Characters of `text` (after normalisation) that have no id, in order
    /// of first occurrence.
    pub fn missing(&self, text: &str) -> Vec<char> {
        let mut out = Vec::new();
        for c in text.nfc() {
            if !self.index.contains_key(&c) && !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// `[BOS, chars.., EOS]`; unknown characters map to [`UNK`].
    pub fn encode(&self, word: &str, max_raw_len: usize) -> Result<Vec<usize>> {
        let chars: Vec<char> = word.nfc().collect();
        if chars.len() > max_raw_len {
            return Err(Error::TooLong {
                word: word.to_string(),
                len: chars.len(),
                max: max_raw_len,
            });
        }
        let mut ids = Vec::with_capacity(chars.len() + 2);
        ids.push(BOS);
        ids.extend(chars.iter().map(|&c| self.id(c).unwrap_or(UNK)));
        ids.push(EOS);
        Ok(ids)
    }

    /// Inverse of [`encode`](Self::encode): drops PAD/BOS/EOS, renders UNK
    /// and MASK by name.
    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            match id {
                PAD | BOS | EOS => {}
                UNK | MASK => out.push_str(SPECIALS[id]),
                _ => match self.chars.get(id - SPECIALS.len()) {
                    Some(&c) => out.push(c),
                    None => {
                        return Err(Error::Index {
                            what: "vocabulary",
                            index: id,
                            size: self.len(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }

    /// One entry per line, `id<TAB>codepoints`. Specials are written by
    /// name; characters as upper-case hex code points.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, name) in SPECIALS.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{name}");
        }
        for (i, c) in self.chars.iter().enumerate() {
            let _ = writeln!(out, "{}\t{:04X}", i + SPECIALS.len(), *c as u32);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: "vocabulary".into(),
            line,
            msg,
        };
        let mut vocab = Self {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        for (n, line) in text.lines().enumerate() {
            let (id, entry) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(n + 1, "expected `id<TAB>entry`".into()))?;
            let id: usize = id
                .parse()
                .map_err(|_| parse_err(n + 1, format!("bad id `{id}`")))?;
            if id != n {
                return Err(parse_err(n + 1, format!("ids must be contiguous; got {id}")));
            }
            if id < SPECIALS.len() {
                if entry != SPECIALS[id] {
                    return Err(parse_err(n + 1, format!("expected {}", SPECIALS[id])));
                }
                continue;
            }
            let c = u32::from_str_radix(entry, 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| parse_err(n + 1, format!("bad code point `{entry}`")))?;
            if vocab.index.contains_key(&c) {
                return Err(parse_err(n + 1, format!("duplicate character {entry}")));
            }
            vocab.insert(c);
        }
        Ok(vocab)
    }
}
