//! Optimisation: learning-rate schedule, Adam, and the training loop shared
//! by pretraining and fine-tuning.

mod adam;
mod schedule;
mod tasks;
mod trainer;

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub use schedule::{lr_at, OptimizerConfig};
pub use tasks::{check_vocab, eval_bleu, finetune, pretrain, reconstruction_set};
pub use trainer::{
    evaluation_count, history_tsv, mean_loss, train, CheckpointRecord, HistoryRow, MetricGoal, TrainConfig,
    TrainOutcome,
};
