use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::augment::{augment, augment_reverse, parse_lexicon, AugmentReport};
use crate::corpus::{load_monolingual, load_parallel, split, stats, DataSplit, ParallelExample};
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, evaluate, rank_worst, transliterate_sequence, ErrorReport, Smoothing};
use crate::model::{count_params, Checkpoint, ModelConfig, ModelParams, Transliterator};
use crate::orthography::{validate_batch, BatchSummary};
use crate::seed;
use crate::tokenizer::{Vocabulary, MAX_RAW_LEN};
use crate::train::{self, history_tsv, TrainOutcome};

use super::config::{Direction, ExperimentConfig};

/// Result of a training command.
#[derive(Debug)]
pub struct RunOutcome {
    pub outcome: TrainOutcome,
    pub checkpoint: Checkpoint,
    pub dir: PathBuf,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

fn is_set(p: &Path) -> bool {
    !p.as_os_str().is_empty()
}

fn require<'a>(path: &'a Path, key: &str) -> Result<&'a Path> {
    if !is_set(path) {
        return Err(Error::invalid(format!("`{key}` is required (set it in the config or with --{key})")));
    }
    if !path.exists() {
        return Err(Error::invalid(format!("{key}: {} does not exist", path.display())));
    }
    Ok(path)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn write(dir: &Path, name: &str, body: impl AsRef<[u8]>) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| Error::io(p, e))
}

/// Writes `config.txt` and `<command>.manifest`: the config digest, every
/// derived seed, the crate version and a digest of each input file.
fn write_manifest(cfg: &ExperimentConfig, command: &str) -> Result<()> {
    let dir = &cfg.out_dir;
    if !is_set(dir) {
        return Ok(());
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let text = cfg.to_text();
    write(dir, "config.txt", &text)?;
    let mut m = String::new();
    let _ = writeln!(m, "command\t{command}");
    let _ = writeln!(m, "version\t{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "config_sha256\t{}", hex::encode(Sha256::digest(text.as_bytes())));
    let _ = writeln!(m, "seed\t{}", cfg.seed);
    for label in SEED_LABELS {
        let _ = writeln!(m, "seed.{label}\t{}", seed::derive(cfg.seed, label));
    }
    for (key, path) in [
        ("parallel", &cfg.parallel),
        ("monolingual", &cfg.monolingual),
        ("lexicon", &cfg.lexicon),
        ("checkpoint", &cfg.checkpoint),
    ] {
        if is_set(path) && path.is_file() {
            let _ = writeln!(m, "input.{key}\t{}\t{}", path.display(), file_digest(path)?);
        }
    }
    write(dir, &format!("{command}.manifest"), m)
}

/// Labels under which component seeds are derived from the root seed.
pub const SEED_LABELS: [&str; 5] = ["split", "init", "shuffle", "dropout", "noise"];

fn require_out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    if !is_set(&cfg.out_dir) {
        return Err(Error::invalid("`out_dir` is required (set it in the config or with --out_dir)"));
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    Ok(&cfg.out_dir)
}

/// Loads the parallel file, splits it with the derived split seed, and
/// orients it per the configured direction.
pub fn load_split(cfg: &ExperimentConfig) -> Result<DataSplit> {
    let path = require(&cfg.parallel, "parallel")?;
    let examples = load_parallel(path)?;
    let s = split(&examples, seed::derive(cfg.seed, "split"), cfg.n_eval, cfg.n_test)?;
    Ok(match cfg.direction {
        Direction::BdlGd => s,
        Direction::GdBdl => s.swapped(),
    })
}

fn model_config(cfg: &ExperimentConfig, vocab: &Vocabulary) -> ModelConfig {
    ModelConfig {
        dropout: cfg.dropout,
        ..ModelConfig::preset(cfg.preset, vocab.len())
    }
}

fn fresh_checkpoint(cfg: &ExperimentConfig, vocab: Vocabulary) -> Result<Checkpoint> {
    let params = ModelParams::init(model_config(cfg, &vocab), seed::derive(cfg.seed, "init"))?;
    Checkpoint::new(params, vocab)
}

fn load_checkpoint(cfg: &ExperimentConfig) -> Result<Checkpoint> {
    Checkpoint::load(require(&cfg.checkpoint, "checkpoint")?)
}

fn save_run(dir: &Path, outcome: &TrainOutcome, checkpoint: &Checkpoint) -> Result<()> {
    write(dir, "history.tsv", history_tsv(&outcome.history))?;
    write(dir, "vocab.tsv", checkpoint.vocab.to_tsv())?;
    checkpoint.save(dir.join("best.ckpt"))
}

fn outcome_summary(outcome: &TrainOutcome, checkpoint: &Checkpoint, metric: &str) -> Vec<String> {
    let mut s = vec![
        format!("parameters\t{}", checkpoint.params.num_params()),
        format!(
            "best\tepoch {} (update {})\t{metric} {:.4}",
            outcome.best.epoch, outcome.best.updates, outcome.best.metric
        ),
        format!("checkpoint_sha256\t{}", checkpoint.digest()),
    ];
    if let Some(reason) = &outcome.aborted {
        s.push(format!("aborted\t{reason}"));
    }
    s
}

/// Denoising pretraining on the monolingual corpus. Without a starting
/// checkpoint the vocabulary covers the corpus and, when set, both columns
/// of the parallel file, so the result can be fine-tuned directly.
pub fn cmd_pretrain(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mono_path = require(&cfg.monolingual, "monolingual")?;
    let dir = require_out_dir(cfg)?.to_path_buf();
    let corpus = load_monolingual(mono_path, MAX_RAW_LEN, cfg.dedup_words)?;
    let init = if is_set(&cfg.checkpoint) {
        load_checkpoint(cfg)?
    } else {
        let mut texts: Vec<String> = corpus.words.clone();
        if is_set(&cfg.parallel) {
            for e in load_parallel(require(&cfg.parallel, "parallel")?)? {
                texts.push(e.source);
                texts.push(e.target);
            }
        }
        fresh_checkpoint(cfg, Vocabulary::build(&texts)?)?
    };
    write_manifest(cfg, "pretrain")?;
    let outcome = train::pretrain(
        &init,
        &corpus,
        &cfg.noise,
        &cfg.train_config(),
        seed::derive(cfg.seed, "noise"),
        cfg.pretrain_eval_size,
    )?;
    let checkpoint = outcome.best_checkpoint(init.vocab.clone())?;
    save_run(&dir, &outcome, &checkpoint)?;
    let mut summary = vec![
        format!("words\t{} ({} over-length dropped)", corpus.words.len(), corpus.dropped),
        format!(
            "epochs\t{:.2}",
            cfg.optimizer.max_updates as f64 / corpus.words.len().max(1) as f64
        ),
    ];
    summary.extend(outcome_summary(&outcome, &checkpoint, "reconstruction loss"));
    write(&dir, "summary.tsv", summary.join("\n") + "\n")?;
    Ok(RunOutcome {
        outcome,
        checkpoint,
        dir,
        summary,
    })
}

fn augment_train(cfg: &ExperimentConfig, train_set: &[ParallelExample]) -> Result<(Vec<ParallelExample>, AugmentReport)> {
    let lex = parse_lexicon(require(&cfg.lexicon, "lexicon")?)?;
    Ok(match cfg.direction {
        Direction::BdlGd => augment(train_set, &lex),
        Direction::GdBdl => augment_reverse(train_set, &lex),
    })
}

/// Fine-tunes the configured checkpoint, or a fresh model whose vocabulary
/// is built from the training split, on the parallel data.
pub fn cmd_finetune(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = require_out_dir(cfg)?.to_path_buf();
    let data = load_split(cfg)?;
    data.write_manifest(&dir)?;
    let mut summary = Vec::new();
    let train_set = if cfg.augment {
        let (aug, report) = augment_train(cfg, &data.train)?;
        write(&dir, "augment.txt", report.to_string())?;
        summary.push(format!("train examples\t{} -> {} after augmentation", report.before, report.after));
        log::info!("augmentation: {} -> {} training examples", report.before, report.after);
        aug
    } else {
        summary.push(format!("train examples\t{}", data.train.len()));
        data.train.clone()
    };
    let init = if is_set(&cfg.checkpoint) {
        load_checkpoint(cfg)?
    } else {
        let texts = train_set.iter().flat_map(|e| [e.source.as_str(), e.target.as_str()]);
        fresh_checkpoint(cfg, Vocabulary::build(texts)?)?
    };
    write_manifest(cfg, "finetune")?;
    let outcome = train::finetune(
        &init,
        &train_set,
        &data.eval,
        &cfg.train_config(),
        &cfg.decode_options(),
        seed::derive(cfg.seed, "shuffle"),
    )?;
    let checkpoint = outcome.best_checkpoint(init.vocab.clone())?;
    save_run(&dir, &outcome, &checkpoint)?;
    summary.extend(outcome_summary(&outcome, &checkpoint, "eval BLEU"));
    write(&dir, "summary.tsv", summary.join("\n") + "\n")?;
    Ok(RunOutcome {
        outcome,
        checkpoint,
        dir,
        summary,
    })
}

/// Corpus BLEU of one split, plus the score of copying the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitScore {
    pub split: String,
    pub bleu: f64,
    pub smoothed: f64,
    pub copy_baseline: f64,
}

fn select<'a>(data: &'a DataSplit, name: &str) -> Result<&'a [ParallelExample]> {
    match name {
        "train" => Ok(&data.train),
        "eval" => Ok(&data.eval),
        "test" => Ok(&data.test),
        _ => Err(Error::invalid(format!("unknown split `{name}` (expected train, eval or test)"))),
    }
}

fn transliterator(cfg: &ExperimentConfig) -> Result<Transliterator> {
    Ok(Transliterator::new(load_checkpoint(cfg)?, cfg.decode_options()))
}

/// Scores the checkpoint on each named split.
pub fn cmd_evaluate(cfg: &ExperimentConfig, splits: &[&str]) -> Result<Vec<SplitScore>> {
    cfg.validate()?;
    let model = transliterator(cfg)?;
    let data = load_split(cfg)?;
    let mut out = Vec::new();
    for &name in splits {
        let examples = select(&data, name)?;
        let e = evaluate(&model, examples)?;
        let sources: Vec<&str> = examples.iter().map(|x| x.source.as_str()).collect();
        let refs: Vec<&str> = examples.iter().map(|x| x.target.as_str()).collect();
        out.push(SplitScore {
            split: name.to_string(),
            bleu: e.bleu.score,
            smoothed: e.smoothed.score,
            copy_baseline: corpus_bleu(&sources, &refs, Smoothing::None)?.score,
        });
    }
    if is_set(&cfg.out_dir) {
        write_manifest(cfg, "evaluate")?;
        write(&cfg.out_dir, "scores.tsv", scores_tsv(&out))?;
    }
    Ok(out)
}

pub fn scores_tsv(scores: &[SplitScore]) -> String {
    let mut s = String::from("split\tchar_bleu\tsmoothed\tcopy_baseline\n");
    for r in scores {
        let _ = writeln!(s, "{}\t{:.2}\t{:.2}\t{:.2}", r.split, r.bleu, r.smoothed, r.copy_baseline);
    }
    s
}

/// One line in the layout of a results-table row: model, direction, then
/// the corpus BLEU of each split.
pub fn table_row(cfg: &ExperimentConfig, scores: &[SplitScore]) -> String {
    let label = format!("Transformer ({})", cfg.preset);
    let cells: Vec<String> = scores.iter().map(|s| format!("{:.2}", s.bleu)).collect();
    format!("{label}\t{}\t{}", cfg.direction, cells.join("\t"))
}

/// Transliterates each line word by word; empty lines stay empty.
pub fn cmd_translit(cfg: &ExperimentConfig, lines: &[String]) -> Result<Vec<String>> {
    let model = transliterator(cfg)?;
    lines.iter().map(|l| transliterate_sequence(&model, l)).collect()
}

/// The `cfg.k` worst-scoring examples of a split.
pub fn cmd_error_analysis(cfg: &ExperimentConfig, split_name: &str) -> Result<ErrorReport> {
    cfg.validate()?;
    let model = transliterator(cfg)?;
    let data = load_split(cfg)?;
    let examples = select(&data, split_name)?;
    let report = rank_worst(&model, examples, cfg.k.min(examples.len()))?;
    if is_set(&cfg.out_dir) {
        write_manifest(cfg, "error-analysis")?;
        write(&cfg.out_dir, "errors.tsv", report.to_tsv())?;
    }
    Ok(report)
}

/// Validates one word per line of `path`.
pub fn cmd_validate(path: &Path) -> Result<BatchSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(validate_batch(text.lines().map(str::trim).filter(|l| !l.is_empty())))
}

/// Augments the whole parallel file (in its configured direction) with
/// heterograph spellings.
pub fn cmd_augment(cfg: &ExperimentConfig) -> Result<(Vec<ParallelExample>, AugmentReport)> {
    let examples = load_parallel(require(&cfg.parallel, "parallel")?)?;
    let oriented: Vec<ParallelExample> = match cfg.direction {
        Direction::BdlGd => examples,
        Direction::GdBdl => examples.iter().map(ParallelExample::swapped).collect(),
    };
    let out = augment_train(cfg, &oriented)?;
    if is_set(&cfg.out_dir) {
        write_manifest(cfg, "augment")?;
    }
    Ok(out)
}

/// Dataset statistics for the parallel file, and the parameter count of
/// the configured preset over its vocabulary.
pub fn cmd_stats(cfg: &ExperimentConfig) -> Result<String> {
    let examples = load_parallel(require(&cfg.parallel, "parallel")?)?;
    let vocab = Vocabulary::build(examples.iter().flat_map(|e| [e.source.as_str(), e.target.as_str()]))?;
    let mut out = stats(&examples).to_string();
    let _ = writeln!(out, "vocabulary\t{}", vocab.len());
    let _ = writeln!(
        out,
        "parameters ({})\t{}",
        cfg.preset,
        count_params(&model_config(cfg, &vocab))?
    );
    Ok(out)
}
