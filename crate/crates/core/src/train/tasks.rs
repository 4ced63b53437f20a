//! Fine-tuning on parallel pairs and denoising pretraining on word lists.

use crate::corpus::{MonoWordCorpus, ParallelExample, ShuffledEpochs};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::model::{decode, Checkpoint, DecodeOptions, ModelParams};
use crate::noising::{corrupt, NoiseConfig, PretrainStream};
use crate::seed;
use crate::tokenizer::{Vocabulary, MAX_RAW_LEN};

use super::trainer::{mean_loss, train, MetricGoal, TrainConfig, TrainOutcome};

/// Errors with [`Error::VocabMismatch`] when `texts` use characters the
/// vocabulary lacks.
pub fn check_vocab<'a>(vocab: &Vocabulary, texts: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut missing: Vec<char> = Vec::new();
    for t in texts {
        for c in vocab.missing(t) {
            if !missing.contains(&c) {
                missing.push(c);
            }
        }
    }
    if missing.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = missing.iter().map(|c| format!("{c:?} (U+{:04X})", *c as u32)).collect();
    Err(Error::VocabMismatch(list.join(", ")))
}

fn encode_pairs(vocab: &Vocabulary, examples: &[ParallelExample]) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    examples
        .iter()
        .map(|e| Ok((vocab.encode(&e.source, MAX_RAW_LEN)?, vocab.encode(&e.target, MAX_RAW_LEN)?)))
        .collect()
}

/// Decodes every source of `examples` and returns the corpus character
/// BLEU against the targets.
pub fn eval_bleu(params: &ModelParams, vocab: &Vocabulary, examples: &[ParallelExample], opts: &DecodeOptions) -> Result<f64> {
    let model = |word: &str| -> Result<String> {
        let ids = vocab.encode(word, MAX_RAW_LEN)?;
        vocab.decode(&decode(params, &ids, opts)?)
    };
    Ok(evaluate(&model, examples)?.bleu.score)
}

/// Trains `init` on `train_set`, one pair per update, in an order
/// reshuffled every epoch from `shuffle_seed`. Every evaluation decodes
/// `eval_set` and scores corpus character BLEU; the best epoch wins.
pub fn finetune(
    init: &Checkpoint,
    train_set: &[ParallelExample],
    eval_set: &[ParallelExample],
    cfg: &TrainConfig,
    decoding: &DecodeOptions,
    shuffle_seed: u64,
) -> Result<TrainOutcome> {
    let vocab = &init.vocab;
    check_vocab(
        vocab,
        train_set.iter().flat_map(|e| [e.source.as_str(), e.target.as_str()]),
    )?;
    let pairs = encode_pairs(vocab, train_set)?;
    let epoch_size = pairs.len();
    let mut stream = ShuffledEpochs::new(pairs, shuffle_seed)?;
    train(
        init.params.clone(),
        &mut stream,
        epoch_size,
        MetricGoal::Maximize,
        cfg,
        |p| eval_bleu(p, vocab, eval_set, decoding),
    )
}

/// Fixed corrupted sample of `corpus` used to track reconstruction loss.
pub fn reconstruction_set(
    corpus: &MonoWordCorpus,
    vocab: &Vocabulary,
    noise: &NoiseConfig,
    size: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let mut words = ShuffledEpochs::new(corpus.words.clone(), seed::derive(seed, "eval-words"))?;
    let mut rng = seed::rng(seed::derive(seed, "eval-noise"));
    let n = size.min(corpus.words.len());
    (0..n)
        .map(|_| {
            let ids = vocab.encode(words.next_ref(), MAX_RAW_LEN)?;
            let c = corrupt(&ids, noise, &mut rng);
            Ok((c.noisy, c.clean))
        })
        .collect()
}

/// Denoising pretraining: the model reconstructs each word from a
/// corrupted copy. Evaluation is the mean reconstruction loss over a fixed
/// sample of at most `eval_size` corrupted words; the lowest wins.
pub fn pretrain(
    init: &Checkpoint,
    corpus: &MonoWordCorpus,
    noise: &NoiseConfig,
    cfg: &TrainConfig,
    seed: u64,
    eval_size: usize,
) -> Result<TrainOutcome> {
    let vocab = &init.vocab;
    check_vocab(vocab, corpus.words.iter().map(String::as_str))?;
    let mut stream = PretrainStream::new(corpus, vocab, *noise, seed)?;
    let held = reconstruction_set(corpus, vocab, noise, eval_size, seed)?;
    let epoch_size = stream.epoch_size();
    train(
        init.params.clone(),
        &mut stream,
        epoch_size,
        MetricGoal::Minimize,
        cfg,
        |p| mean_loss(p, &held),
    )
}
