//! Scoring, error analysis and whole-line transliteration.

mod bleu;
mod report;

pub use bleu::{char_bleu_corpus, char_bleu_sentence, corpus_bleu, BleuScore, Smoothing, MAX_ORDER};
pub use report::{evaluate, rank_worst, transliterate_sequence, ErrorReport, ErrorRow, Evaluation};
