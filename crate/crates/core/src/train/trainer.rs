use std::fmt;

use crate::autograd::Tape;
use crate::error::{Error, Result};
use crate::model::{bind, Checkpoint, Graph, ModelParams};
use crate::seed;
use crate::tokenizer::Vocabulary;

use super::adam::{adam_step, clip_grad_norm, AdamState};
use super::schedule::{lr_at, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    /// Seeds the dropout masks.
    pub dropout_seed: u64,
}

/// Whether a larger evaluation metric is better (BLEU) or worse (loss).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricGoal {
    Maximize,
    Minimize,
}

impl MetricGoal {
    fn improves(self, candidate: f64, best: f64) -> bool {
        if candidate.is_nan() {
            return false;
        }
        if best.is_nan() {
            return true;
        }
        match self {
            MetricGoal::Maximize => candidate > best,
            MetricGoal::Minimize => candidate < best,
        }
    }
}

/// One evaluation point. Epoch 0 is the initial model, before any update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub updates: usize,
    /// Mean training loss over the updates since the previous row.
    pub train_loss: Option<f64>,
    pub eval_metric: f64,
}

/// `epoch<TAB>updates<TAB>train_loss<TAB>eval_metric`; the loss of epoch 0
/// is written as `-`.
impl fmt::Display for HistoryRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let loss = self.train_loss.map_or_else(|| "-".to_string(), |l| format!("{l:.6}"));
        write!(f, "{}\t{}\t{}\t{:.6}", self.epoch, self.updates, loss, self.eval_metric)
    }
}

pub fn history_tsv(rows: &[HistoryRow]) -> String {
    rows.iter().map(|r| format!("{r}\n")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub epoch: usize,
    pub updates: usize,
    pub metric: f64,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best: CheckpointRecord,
    pub history: Vec<HistoryRow>,
    /// Why training stopped early, if it did. The best record then comes
    /// from the evaluations made before the failure.
    pub aborted: Option<String>,
}

impl TrainOutcome {
    pub fn best_checkpoint(&self, vocab: Vocabulary) -> Result<Checkpoint> {
        Checkpoint::new(self.best.params.clone(), vocab)
    }
}

/// Runs `max_updates` single-example Adam updates over `stream`, which
/// yields `(source, target)` id sequences. The model is evaluated before
/// the first update, after every `epoch_size` updates and after the last
/// update; the best evaluation (ties to the earlier one) is kept.
///
/// Update `u` (counting from 1) uses learning rate `lr_at(u)`.
pub fn train<S, E>(
    init: ModelParams,
    stream: &mut S,
    epoch_size: usize,
    goal: MetricGoal,
    cfg: &TrainConfig,
    mut eval_fn: E,
) -> Result<TrainOutcome>
where
    S: Iterator<Item = (Vec<usize>, Vec<usize>)> + ?Sized,
    E: FnMut(&ModelParams) -> Result<f64>,
{
    let opt = &cfg.optimizer;
    opt.validate()?;
    if epoch_size == 0 {
        return Err(Error::invalid("epoch_size must be positive"));
    }
    let mut params = init;
    let mut state = AdamState::for_params(&params);
    let mut dropout = seed::rng(cfg.dropout_seed);

    let initial = eval_fn(&params)?;
    let mut history = vec![HistoryRow {
        epoch: 0,
        updates: 0,
        train_loss: None,
        eval_metric: initial,
    }];
    log::info!("{}", history[0]);
    let mut best = CheckpointRecord {
        epoch: 0,
        updates: 0,
        metric: initial,
        params: params.clone(),
    };
    let mut aborted = None;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut epoch = 0;

    for update in 1..=opt.max_updates {
        let (source, target) = stream
            .next()
            .ok_or_else(|| Error::invalid("training stream ended early"))?;
        let mut tape = Tape::new();
        let vars = bind(&mut tape, &params, true);
        let loss = Graph::new(&mut tape, &vars, params.config(), Some(&mut dropout)).loss(&source, &target)?;
        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            aborted = Some(format!("non-finite loss {loss_value} at update {update}"));
            break;
        }
        tape.backward(loss)?;
        let mut grads: Vec<Vec<f64>> = vars
            .iter()
            .zip(params.tensors())
            .map(|(&v, t)| tape.grad(v).map_or_else(|| vec![0.0; t.numel()], <[f64]>::to_vec))
            .collect();
        if let Some(max_norm) = opt.clip_norm {
            clip_grad_norm(&mut grads, max_norm);
        }
        let lr = lr_at(update, opt)?;
        if let Err(e) = adam_step(params.tensors_mut(), &grads, &mut state, lr, opt) {
            aborted = Some(format!("{e} at update {update}"));
            break;
        }
        loss_sum += loss_value;
        loss_count += 1;

        if update % epoch_size == 0 || update == opt.max_updates {
            epoch += 1;
            let metric = eval_fn(&params)?;
            let row = HistoryRow {
                epoch,
                updates: update,
                train_loss: Some(loss_sum / loss_count as f64),
                eval_metric: metric,
            };
            log::info!("{row}");
            history.push(row);
            loss_sum = 0.0;
            loss_count = 0;
            if goal.improves(metric, best.metric) {
                best = CheckpointRecord {
                    epoch,
                    updates: update,
                    metric,
                    params: params.clone(),
                };
            }
        }
    }
    if let Some(reason) = &aborted {
        log::warn!("training aborted: {reason}");
    }
    Ok(TrainOutcome { best, history, aborted })
}

/// Mean over `pairs` of the per-example teacher-forced cross-entropy, with
/// dropout off.
pub fn mean_loss(params: &ModelParams, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("no examples to score"));
    }
    let mut tape = Tape::no_grad();
    let vars = bind(&mut tape, params, false);
    let base = tape.len();
    let mut total = 0.0;
    for (source, target) in pairs {
        let loss = Graph::new(&mut tape, &vars, params.config(), None).loss(source, target)?;
        total += tape.value(loss).item();
        tape.truncate(base);
    }
    Ok(total / pairs.len() as f64)
}

/// Number of evaluation points after the initial one for a run of
/// `max_updates` over epochs of `epoch_size`: one per completed epoch plus
/// one for a trailing partial epoch.
pub fn evaluation_count(max_updates: usize, epoch_size: usize) -> usize {
    max_updates / epoch_size + usize::from(max_updates % epoch_size != 0)
}
