//! Flat `key = value` experiment configuration.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{DecodeOptions, Preset, Strategy};
use crate::noising::NoiseConfig;
use crate::train::{OptimizerConfig, TrainConfig};

/// Which column of the parallel file is the model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// First column in, second column out.
    BdlGd,
    /// Columns swapped.
    GdBdl,
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bdl-gd" => Ok(Direction::BdlGd),
            "gd-bdl" => Ok(Direction::GdBdl),
            _ => Err(Error::invalid(format!("unknown direction `{s}` (expected bdl-gd or gd-bdl)"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::BdlGd => "bdl-gd",
            Direction::GdBdl => "gd-bdl",
        })
    }
}

/// Every setting of an experiment. Empty paths mean "not set".
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub direction: Direction,
    pub preset: Preset,
    pub dropout: f64,
    pub parallel: PathBuf,
    pub monolingual: PathBuf,
    pub lexicon: PathBuf,
    pub checkpoint: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub n_eval: usize,
    pub n_test: usize,
    pub augment: bool,
    pub dedup_words: bool,
    pub pretrain_eval_size: usize,
    pub optimizer: OptimizerConfig,
    pub noise: NoiseConfig,
    pub greedy: bool,
    pub beam_width: usize,
    pub length_penalty: f64,
    pub max_len: usize,
    pub k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            direction: Direction::BdlGd,
            preset: Preset::Tiny,
            dropout: 0.1,
            parallel: PathBuf::new(),
            monolingual: PathBuf::new(),
            lexicon: PathBuf::new(),
            checkpoint: PathBuf::new(),
            out_dir: PathBuf::new(),
            seed: 1,
            n_eval: 50,
            n_test: 50,
            augment: false,
            dedup_words: false,
            pretrain_eval_size: 500,
            optimizer: OptimizerConfig::default(),
            noise: NoiseConfig::default(),
            greedy: false,
            beam_width: 5,
            length_penalty: 1.0,
            max_len: DecodeOptions::default().max_len,
            k: 10,
        }
    }
}

/// Keys in file order, with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("direction", "bdl-gd or gd-bdl"),
    ("preset", "tiny or base"),
    ("dropout", "dropout probability during training"),
    ("parallel", "parallel TSV (source<TAB>target)"),
    ("monolingual", "monolingual text for pretraining"),
    ("lexicon", "pronunciation lexicon TSV (spelling<TAB>ipa)"),
    ("checkpoint", "model checkpoint to start from or evaluate"),
    ("out_dir", "run directory"),
    ("seed", "root seed"),
    ("n_eval", "held-out eval examples"),
    ("n_test", "held-out test examples"),
    ("augment", "add heterograph spellings to the training set"),
    ("dedup_words", "keep one copy of each monolingual word"),
    ("pretrain_eval_size", "words in the fixed reconstruction-loss sample"),
    ("peak_lr", "learning rate at the end of warm-up"),
    ("warmup_updates", "linear warm-up length"),
    ("max_updates", "total updates"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("epsilon", "Adam epsilon"),
    ("weight_decay", "decoupled weight decay"),
    ("clip_norm", "global gradient-norm limit, or none"),
    ("mask_ratio", "fraction of characters corrupted"),
    ("mean_span", "mean corrupted span length, or inf"),
    ("delete_prob", "probability a span is deleted instead of masked"),
    ("decoding", "beam or greedy"),
    ("beam_width", "beam width"),
    ("length_penalty", "beam length-normalisation exponent"),
    ("max_len", "maximum generated tokens, EOS included"),
    ("k", "rows in the error-analysis report"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("bad value `{value}` for `{key}` (expected true or false)"))),
    }
}

impl ExperimentConfig {
    pub fn get(&self, key: &str) -> Result<String> {
        let o = &self.optimizer;
        Ok(match key {
            "direction" => self.direction.to_string(),
            "preset" => self.preset.to_string(),
            "dropout" => self.dropout.to_string(),
            "parallel" => self.parallel.display().to_string(),
            "monolingual" => self.monolingual.display().to_string(),
            "lexicon" => self.lexicon.display().to_string(),
            "checkpoint" => self.checkpoint.display().to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "seed" => self.seed.to_string(),
            "n_eval" => self.n_eval.to_string(),
            "n_test" => self.n_test.to_string(),
            "augment" => self.augment.to_string(),
            "dedup_words" => self.dedup_words.to_string(),
            "pretrain_eval_size" => self.pretrain_eval_size.to_string(),
            "peak_lr" => o.peak_lr.to_string(),
            "warmup_updates" => o.warmup_updates.to_string(),
            "max_updates" => o.max_updates.to_string(),
            "beta1" => o.beta1.to_string(),
            "beta2" => o.beta2.to_string(),
            "epsilon" => o.epsilon.to_string(),
            "weight_decay" => o.weight_decay.to_string(),
            "clip_norm" => o.clip_norm.map_or_else(|| "none".into(), |c| c.to_string()),
            "mask_ratio" => self.noise.mask_ratio.to_string(),
            "mean_span" => self.noise.mean_span.to_string(),
            "delete_prob" => self.noise.delete_prob.to_string(),
            "decoding" => if self.greedy { "greedy" } else { "beam" }.into(),
            "beam_width" => self.beam_width.to_string(),
            "length_penalty" => self.length_penalty.to_string(),
            "max_len" => self.max_len.to_string(),
            "k" => self.k.to_string(),
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let o = &mut self.optimizer;
        match key {
            "direction" => self.direction = value.parse()?,
            "preset" => self.preset = value.parse()?,
            "dropout" => self.dropout = parse(key, value)?,
            "parallel" => self.parallel = value.into(),
            "monolingual" => self.monolingual = value.into(),
            "lexicon" => self.lexicon = value.into(),
            "checkpoint" => self.checkpoint = value.into(),
            "out_dir" => self.out_dir = value.into(),
            "seed" => self.seed = parse(key, value)?,
            "n_eval" => self.n_eval = parse(key, value)?,
            "n_test" => self.n_test = parse(key, value)?,
            "augment" => self.augment = parse_bool(key, value)?,
            "dedup_words" => self.dedup_words = parse_bool(key, value)?,
            "pretrain_eval_size" => self.pretrain_eval_size = parse(key, value)?,
            "peak_lr" => o.peak_lr = parse(key, value)?,
            "warmup_updates" => o.warmup_updates = parse(key, value)?,
            "max_updates" => o.max_updates = parse(key, value)?,
            "beta1" => o.beta1 = parse(key, value)?,
            "beta2" => o.beta2 = parse(key, value)?,
            "epsilon" => o.epsilon = parse(key, value)?,
            "weight_decay" => o.weight_decay = parse(key, value)?,
            "clip_norm" => {
                o.clip_norm = match value {
                    "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "mask_ratio" => self.noise.mask_ratio = parse(key, value)?,
            "mean_span" => self.noise.mean_span = parse(key, value)?,
            "delete_prob" => self.noise.delete_prob = parse(key, value)?,
            "decoding" => {
                self.greedy = match value {
                    "greedy" => true,
                    "beam" => false,
                    _ => return Err(Error::invalid(format!("unknown decoding `{value}` (expected beam or greedy)"))),
                }
            }
            "beam_width" => self.beam_width = parse(key, value)?,
            "length_penalty" => self.length_penalty = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not present
    /// keep their defaults.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_string(),
                line: n + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            cfg.set(key.trim(), value).map_err(|e| err(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Every key, one per line, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            strategy: if self.greedy {
                Strategy::Greedy
            } else {
                Strategy::Beam {
                    width: self.beam_width,
                    length_penalty: self.length_penalty,
                }
            },
            max_len: self.max_len,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer,
            dropout_seed: crate::seed::derive(self.seed, "dropout"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.noise.validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !self.greedy && self.beam_width == 0 {
            return Err(Error::invalid("beam_width must be at least 1"));
        }
        if !(self.length_penalty >= 0.0) {
            return Err(Error::invalid(format!("length_penalty {} must be >= 0", self.length_penalty)));
        }
        Ok(())
    }
}
