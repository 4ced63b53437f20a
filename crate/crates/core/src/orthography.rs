//! Broad/slender vowel agreement ("caol ri caol, leathann ri leathann").
//!
//! A word is split into letter runs. Inside each run, every maximal
//! consonant cluster with a vowel on both sides must have flanking vowels of
//! the same class. Clusters at the start or end of a run are not checked.

use std::fmt::{self, Write as _};

const BROAD: &[char] = &['a', 'o', 'u', 'à', 'ò', 'ù', 'á', 'ó', 'ú'];
const SLENDER: &[char] = &['e', 'i', 'è', 'ì', 'é', 'í'];
const CONSONANTS: &[char] = &['b', 'c', 'd', 'f', 'g', 'h', 'l', 'm', 'n', 'p', 'r', 's', 't'];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VowelClass {
    Broad,
    Slender,
}

/// Class of a (lower-case) vowel; `None` for anything else.
pub fn vowel_class(c: char) -> Option<VowelClass> {
    if BROAD.contains(&c) {
        Some(VowelClass::Broad)
    } else if SLENDER.contains(&c) {
        Some(VowelClass::Slender)
    } else {
        None
    }
}

fn is_gaelic_letter(c: char) -> bool {
    vowel_class(c).is_some() || CONSONANTS.contains(&c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    /// Character index, within the whole word, of the cluster's first letter.
    pub start: usize,
    pub left: char,
    pub right: char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Valid,
    Invalid,
    /// Contains letters outside the Gaelic alphabet (or an unknown-token
    /// marker) and no violation elsewhere.
    NotAssessable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Valid => "valid",
            Status::Invalid => "invalid",
            Status::NotAssessable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationResult {
    pub status: Status,
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(word: &str) -> ValidationResult {
    let chars: Vec<char> = word
        .chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect();
    let mut violations = Vec::new();
    let mut foreign = word.contains("[UNK]");
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphabetic() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].is_alphabetic() {
            i += 1;
        }
        let token = &chars[start..i];
        if !token.iter().all(|&c| is_gaelic_letter(c)) {
            foreign = true;
            continue;
        }
        check_token(token, start, &mut violations);
    }
    let status = if !violations.is_empty() {
        Status::Invalid
    } else if foreign {
        Status::NotAssessable
    } else {
        Status::Valid
    };
    ValidationResult { status, violations }
}

fn check_token(token: &[char], offset: usize, out: &mut Vec<Violation>) {
    let mut last_vowel: Option<char> = None;
    let mut cluster_start = None;
    for (j, &c) in token.iter().enumerate() {
        match vowel_class(c) {
            Some(class) => {
                if let (Some(left), Some(start)) = (last_vowel, cluster_start) {
                    if vowel_class(left) != Some(class) {
                        out.push(Violation {
                            start: offset + start,
                            left,
                            right: c,
                        });
                    }
                }
                last_vowel = Some(c);
                cluster_start = None;
            }
            None => {
                if last_vowel.is_some() && cluster_start.is_none() {
                    cluster_start = Some(j);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub results: Vec<(String, ValidationResult)>,
    pub valid: usize,
    pub invalid: usize,
    pub not_assessable: usize,
}

impl BatchSummary {
    /// `valid / (valid + invalid)`; `None` when no word could be assessed.
    pub fn fraction_valid(&self) -> Option<f64> {
        let assessed = self.valid + self.invalid;
        (assessed > 0).then(|| self.valid as f64 / assessed as f64)
    }

    /// `word<TAB>valid|invalid|n/a<TAB>positions`, positions comma-separated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (word, r) in &self.results {
            let positions: Vec<String> = r.violations.iter().map(|v| v.start.to_string()).collect();
            let _ = writeln!(out, "{word}\t{}\t{}", r.status, positions.join(","));
        }
        out
    }
}

pub fn validate_batch<I, S>(words: I) -> BatchSummary
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut summary = BatchSummary {
        results: Vec::new(),
        valid: 0,
        invalid: 0,
        not_assessable: 0,
    };
    for w in words {
        let r = validate(w.as_ref());
        match r.status {
            Status::Valid => summary.valid += 1,
            Status::Invalid => summary.invalid += 1,
            Status::NotAssessable => summary.not_assessable += 1,
        }
        summary.results.push((w.as_ref().to_string(), r));
    }
    summary
}
