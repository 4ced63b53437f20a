//! Heterograph discovery from a pronunciation lexicon, and training-set
//! augmentation with alternative spellings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::corpus::ParallelExample;
use crate::error::{Error, Result};
use crate::tokenizer::normalize;

/// Spelling to the set of its normalised pronunciations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PronunciationLexicon {
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl PronunciationLexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, spelling: &str, ipa: &str) {
        self.entries
            .entry(normalize(spelling))
            .or_default()
            .insert(normalize_ipa(ipa));
    }
}

/// Removes stress marks and syllable dots, then any enclosing `/../` or
/// `[..]`, then composes (NFC). Length marks are kept.
pub fn normalize_ipa(ipa: &str) -> String {
    let stripped: String = ipa.chars().filter(|c| !matches!(c, 'ˈ' | 'ˌ' | '.')).collect();
    let mut s = stripped.trim();
    loop {
        let inner = s
            .strip_prefix('/')
            .and_then(|t| t.strip_suffix('/'))
            .or_else(|| s.strip_prefix('[').and_then(|t| t.strip_suffix(']')));
        match inner {
            Some(t) => s = t.trim(),
            None => break,
        }
    }
    normalize(s)
}

/// Parses `spelling<TAB>ipa` lines; blank lines are skipped.
pub fn parse_lexicon_str(text: &str, origin: &str) -> Result<PronunciationLexicon> {
    let mut lex = PronunciationLexicon::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            path: origin.to_string(),
            line: n + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(err("expected `spelling<TAB>ipa`"));
        }
        if fields[0].trim().is_empty() {
            return Err(err("empty spelling"));
        }
        if normalize_ipa(fields[1]).is_empty() {
            return Err(err("empty pronunciation"));
        }
        lex.insert(fields[0].trim(), fields[1]);
    }
    Ok(lex)
}

pub fn parse_lexicon(path: impl AsRef<Path>) -> Result<PronunciationLexicon> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon_str(&text, &path.display().to_string())
}

/// Spellings sharing one pronunciation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeterographGroup {
    pub ipa: String,
    /// At least two, sorted.
    pub spellings: Vec<String>,
}

/// Groups ordered by pronunciation.
pub fn find_heterographs(lex: &PronunciationLexicon) -> Vec<HeterographGroup> {
    let mut by_ipa: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (spelling, ipas) in &lex.entries {
        for ipa in ipas {
            by_ipa.entry(ipa).or_default().insert(spelling);
        }
    }
    by_ipa
        .into_iter()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(ipa, s)| HeterographGroup {
            ipa: ipa.to_string(),
            spellings: s.into_iter().map(str::to_string).collect(),
        })
        .collect()
}

/// Every other spelling that shares a pronunciation with `word`.
pub fn alternatives(groups: &[HeterographGroup], word: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for g in groups {
        if g.spellings.iter().any(|s| s == word) {
            out.extend(g.spellings.iter().filter(|s| *s != word).cloned());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentReport {
    pub before: usize,
    pub after: usize,
    /// Original spelling and the alternatives added for it, per expanded
    /// example.
    pub expansions: Vec<(String, Vec<String>)>,
}

impl fmt::Display for AugmentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = if self.before == 0 {
            0.0
        } else {
            100.0 * (self.after - self.before) as f64 / self.before as f64
        };
        writeln!(f, "examples before\t{}", self.before)?;
        writeln!(f, "examples after\t{}", self.after)?;
        writeln!(f, "added\t{} ({pct:.1}%)", self.after - self.before)?;
        for (word, alts) in &self.expansions {
            writeln!(f, "{word}\t{}", alts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Side {
    Source,
    Target,
}

fn expand(train: &[ParallelExample], lex: &PronunciationLexicon, side: Side) -> (Vec<ParallelExample>, AugmentReport) {
    let groups = find_heterographs(lex);
    let mut seen: HashSet<(String, String)> = train.iter().map(|e| (e.source.clone(), e.target.clone())).collect();
    let mut out = train.to_vec();
    let mut expansions = Vec::new();
    for ex in train {
        let word = match side {
            Side::Source => &ex.source,
            Side::Target => &ex.target,
        };
        let mut added = Vec::new();
        for alt in alternatives(&groups, word) {
            let pair = match side {
                Side::Source => (alt.clone(), ex.target.clone()),
                Side::Target => (ex.source.clone(), alt.clone()),
            };
            if seen.insert(pair.clone()) {
                out.push(ParallelExample::new(pair.0, pair.1, ex.index));
                added.push(alt);
            }
        }
        if !added.is_empty() {
            expansions.push((word.clone(), added));
        }
    }
    let report = AugmentReport {
        before: train.len(),
        after: out.len(),
        expansions,
    };
    (out, report)
}

/// Appends `(source, alternative)` for every heterograph of each target.
/// Originals come first, unchanged; no pair is added twice. Augmented
/// examples keep the line index of the example they were derived from.
pub fn augment(train: &[ParallelExample], lex: &PronunciationLexicon) -> (Vec<ParallelExample>, AugmentReport) {
    expand(train, lex, Side::Target)
}

/// [`augment`] for pairs whose Gaelic side is the source.
pub fn augment_reverse(train: &[ParallelExample], lex: &PronunciationLexicon) -> (Vec<ParallelExample>, AugmentReport) {
    expand(train, lex, Side::Source)
}
