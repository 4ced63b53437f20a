use std::fmt::{self, Write as _};

use crate::corpus::ParallelExample;
use crate::error::{Error, Result};
use crate::model::Transliterate;
use crate::tokenizer::{raw_len, MAX_RAW_LEN};

use super::bleu::{char_bleu_sentence, corpus_bleu, BleuScore, Smoothing};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub input: String,
    pub output: String,
    pub reference: String,
    /// Add-one smoothed sentence BLEU.
    pub score: f64,
}

/// Rows in ascending score order; equal scores keep input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

/// Decodes every source in `test`, scores it against its reference and
/// keeps the `k` lowest-scoring rows.
pub fn rank_worst<T: Transliterate + ?Sized>(model: &T, test: &[ParallelExample], k: usize) -> Result<ErrorReport> {
    if k > test.len() {
        return Err(Error::invalid(format!("k = {k} but only {} examples", test.len())));
    }
    let mut rows = test
        .iter()
        .map(|ex| {
            let output = model.transliterate(&ex.source)?;
            let score = char_bleu_sentence(&output, &ex.target, Smoothing::AddOne).score;
            Ok(ErrorRow {
                input: ex.source.clone(),
                output,
                reference: ex.target.clone(),
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.score.total_cmp(&b.score));
    rows.truncate(k);
    Ok(ErrorReport { rows })
}

impl ErrorReport {
    /// `input<TAB>output<TAB>reference<TAB>score` with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("input\toutput\treference\tscore\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.2}", r.input, r.output, r.reference, r.score);
        }
        out
    }
}

/// Column-aligned table.
impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = ["Input", "Output", "Reference", "BLEU"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.input.clone(),
                    r.output.clone(),
                    r.reference.clone(),
                    format!("{:.2}", r.score),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |f: &mut fmt::Formatter<'_>, row: [&str; 4]| -> fmt::Result {
            for (i, (cell, w)) in row.iter().zip(widths).enumerate() {
                let pad = w - cell.chars().count();
                if i == 3 {
                    write!(f, "{}{}", " ".repeat(pad), cell)?;
                } else {
                    write!(f, "{}{}  ", cell, " ".repeat(pad))?;
                }
            }
            writeln!(f)
        };
        line(f, header)?;
        for row in &cells {
            line(f, [&row[0], &row[1], &row[2], &row[3]])?;
        }
        Ok(())
    }
}

/// Splits `line` on whitespace, transliterates each word on its own and
/// joins the results with single spaces.
pub fn transliterate_sequence<T: Transliterate + ?Sized>(model: &T, line: &str) -> Result<String> {
    let words: Vec<&str> = line.split_whitespace().collect();
    if let Some(w) = words.iter().find(|w| raw_len(w) > MAX_RAW_LEN) {
        return Err(Error::TooLong {
            word: w.to_string(),
            len: raw_len(w),
            max: MAX_RAW_LEN,
        });
    }
    let outputs = words
        .iter()
        .map(|w| model.transliterate(w))
        .collect::<Result<Vec<_>>>()?;
    Ok(outputs.join(" "))
}

/// Corpus scores of a model on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub bleu: BleuScore,
    pub smoothed: BleuScore,
    pub outputs: Vec<String>,
}

pub fn evaluate<T: Transliterate + ?Sized>(model: &T, examples: &[ParallelExample]) -> Result<Evaluation> {
    let outputs = examples
        .iter()
        .map(|ex| model.transliterate(&ex.source))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&str> = examples.iter().map(|e| e.target.as_str()).collect();
    Ok(Evaluation {
        bleu: corpus_bleu(&outputs, &refs, Smoothing::None)?,
        smoothed: corpus_bleu(&outputs, &refs, Smoothing::AddOne)?,
        outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;
    use std::collections::HashMap;

    fn table(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Result<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        move |w: &str| Ok(map.get(w).cloned().unwrap_or_else(|| w.to_string()))
    }

    fn examples(pairs: &[(&str, &str)]) -> Vec<ParallelExample> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, (s, t))| ParallelExample::new(*s, *t, i))
            .collect()
    }

    #[test]
    fn perfect_model_keeps_input_order() {
        let test = examples(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let model = table(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let report = rank_worst(&model, &test, 3).unwrap();
        assert!(report.rows.iter().all(|r| r.score == 100.0));
        let inputs: Vec<&str> = report.rows.iter().map(|r| r.input.as_str()).collect();
        assert_eq!(inputs, ["a", "b", "c"]);
        assert!(rank_worst(&model, &test, 4).is_err());
    }

    #[test]
    fn hand_scored_ordering() {
        // Sentence scores by hand (add-one on empty orders):
        //   abcf vs abcd: (3/4 * 2/3 * 1/2 * 1/2)^(1/4) = 0.595
        //   abxd vs abcd: (3/4 * 1/3 * 1/3 * 1/2)^(1/4) = 0.408
        //   abcd vs abcd: 1
        //   zzzz vs abcd: p1 = 1/5, p2 = 1/4, p3 = 1/3, p4 = 1/2 -> 0.302
        //   ab   vs abcd: p = 1, 1, 1, 1 with BP = e^-1 -> 0.368
        let test = examples(&[("1", "abcd"), ("2", "abcd"), ("3", "abcd"), ("4", "abcd"), ("5", "abcd")]);
        let model = table(&[("1", "abcf"), ("2", "abxd"), ("3", "abcd"), ("4", "zzzz"), ("5", "ab")]);
        let report = rank_worst(&model, &test, 5).unwrap();
        let order: Vec<&str> = report.rows.iter().map(|r| r.input.as_str()).collect();
        assert_eq!(order, ["4", "5", "2", "1", "3"]);
        let expected = [
            (1.0f64 / 120.0).powf(0.25),
            (-1.0f64).exp(),
            (1.0f64 / 24.0).powf(0.25),
            0.125f64.powf(0.25),
            1.0,
        ];
        for (row, e) in report.rows.iter().zip(expected) {
            assert!((row.score - 100.0 * e).abs() < 1e-9, "{row:?}");
        }
        let worst2 = rank_worst(&model, &test, 2).unwrap();
        assert_eq!(worst2.rows[..], report.rows[..2]);
        assert!(report.to_tsv().starts_with("input\toutput\treference\tscore\n4\tzzzz\tabcd\t30.21\n"));
        assert!(report.to_string().starts_with("Input  Output  Reference"));
    }

    #[test]
    fn sequence_joins_word_outputs() {
        let calls = Cell::new(0);
        let model = |w: &str| {
            calls.set(calls.get() + 1);
            Ok(format!("<{w} {w}>"))
        };
        let out = transliterate_sequence(&model, "  ab\tc  d ").unwrap();
        assert_eq!(out, "<ab ab> <c c> <d d>");
        assert_eq!(calls.get(), 3);
        assert_eq!(transliterate_sequence(&model, "").unwrap(), "");
        assert_eq!(transliterate_sequence(&model, "x").unwrap(), "<x x>");
        match transliterate_sequence(&model, &format!("ok {}", "q".repeat(21))) {
            Err(Error::TooLong { word, .. }) => assert_eq!(word, "q".repeat(21)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn evaluate_copy_model() {
        let test = examples(&[("abc", "abc"), ("de f", "de f")]);
        let e = evaluate(&|w: &str| Ok(w.to_string()), &test).unwrap();
        assert_eq!(e.bleu.score, 100.0);
        assert_eq!(e.smoothed.score, 100.0);
        assert_eq!(e.outputs, ["abc", "de f"]);
    }
}
