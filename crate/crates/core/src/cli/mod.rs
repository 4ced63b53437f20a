//! Experiment configuration and the commands behind the `lismore` binary.
//! Each command is a plain function so experiments can be scripted from
//! Rust as well as run from the shell.

mod commands;
mod config;

pub use commands::{
    cmd_augment, cmd_error_analysis, cmd_evaluate, cmd_finetune, cmd_pretrain, cmd_stats, cmd_translit,
    cmd_validate, file_digest, load_split, scores_tsv, table_row, RunOutcome, SplitScore, SEED_LABELS,
};
pub use config::{Direction, ExperimentConfig, KEYS};
