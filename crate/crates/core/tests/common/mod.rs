//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use lismore::corpus::ParallelExample;
use unicode_normalization::UnicodeNormalization;

/// Clipped n-gram matches by greedy pairing: each hypothesis n-gram takes
/// the first unused identical reference n-gram.
fn clipped_matches(h: &[char], r: &[char], n: usize) -> (usize, usize) {
    if h.len() < n {
        return (0, 0);
    }
    let mut used = vec![false; r.len().saturating_sub(n - 1)];
    let mut matches = 0;
    for i in 0..=h.len() - n {
        for j in 0..used.len() {
            if !used[j] && h[i..i + n] == r[j..j + n] {
                used[j] = true;
                matches += 1;
                break;
            }
        }
    }
    (matches, h.len() - n + 1)
}

/// Character BLEU-4 over aligned pairs. `smooth` applies add-one
/// smoothing to orders without matches.
pub fn reference_bleu(pairs: &[(&str, &str)], smooth: bool) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (hyp, reference) in pairs {
        let h: Vec<char> = hyp.nfc().collect();
        let rf: Vec<char> = reference.nfc().collect();
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            let (mm, tt) = clipped_matches(&h, &rf, n);
            m[n - 1] += mm;
            t[n - 1] += tt;
        }
    }
    if c == 0 {
        return if r == 0 { 100.0 } else { 0.0 };
    }
    let mut logs = Vec::new();
    for n in 0..4 {
        if m[n] == 0 {
            if smooth {
                logs.push((1.0 / (t[n] as f64 + 1.0)).ln());
            } else if t[n] > 0 {
                return 0.0;
            }
        } else {
            logs.push((m[n] as f64 / t[n] as f64).ln());
        }
    }
    if logs.is_empty() {
        return 0.0;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

/// Augmentation by definition: for every example, every other spelling
/// sharing some pronunciation with its target, minus pairs already present.
pub fn reference_augment(train: &[ParallelExample], lexicon: &[(&str, &str)]) -> Vec<ParallelExample> {
    let mut out = train.to_vec();
    for ex in train {
        let ipas: BTreeSet<&str> = lexicon.iter().filter(|(s, _)| *s == ex.target).map(|(_, i)| *i).collect();
        let alts: BTreeSet<&str> = lexicon
            .iter()
            .filter(|(s, i)| *s != ex.target && ipas.contains(i))
            .map(|(s, _)| *s)
            .collect();
        for alt in alts {
            if !out.iter().any(|e| e.source == ex.source && e.target == alt) {
                out.push(ParallelExample::new(ex.source.clone(), alt, ex.index));
            }
        }
    }
    out
}
