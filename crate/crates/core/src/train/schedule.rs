use crate::error::{Error, Result};

/// Adam and learning-rate schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub peak_lr: f64,
    pub warmup_updates: usize,
    pub max_updates: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay, scaled by the learning rate.
    pub weight_decay: f64,
    /// Global gradient-norm limit; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            peak_lr: 5e-4,
            warmup_updates: 4000,
            max_updates: 100_000,
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-6,
            weight_decay: 0.0,
            clip_norm: Some(1.0),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return bad(format!("peak_lr must be positive, got {}", self.peak_lr));
        }
        if self.max_updates > 0 && self.warmup_updates >= self.max_updates {
            return bad(format!(
                "warmup_updates ({}) must be below max_updates ({})",
                self.warmup_updates, self.max_updates
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad(format!("clip_norm must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

/// Linear warm-up from 0 to `peak_lr` over `warmup_updates`, then linear
/// decay to 0 at `max_updates`.
pub fn lr_at(step: usize, cfg: &OptimizerConfig) -> Result<f64> {
    if step > cfg.max_updates {
        return Err(Error::invalid(format!(
            "step {step} beyond max_updates {}",
            cfg.max_updates
        )));
    }
    let lr = if step == cfg.warmup_updates {
        if cfg.max_updates == 0 {
            0.0
        } else {
            cfg.peak_lr
        }
    } else if step < cfg.warmup_updates {
        cfg.peak_lr * (step as f64 / cfg.warmup_updates as f64)
    } else {
        let span = (cfg.max_updates - cfg.warmup_updates) as f64;
        cfg.peak_lr * ((cfg.max_updates - step) as f64 / span)
    };
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_points() {
        let c = OptimizerConfig::default();
        assert_eq!(lr_at(0, &c).unwrap(), 0.0);
        assert_eq!(lr_at(4000, &c).unwrap(), 5e-4);
        assert_eq!(lr_at(100_000, &c).unwrap(), 0.0);
        assert_eq!(lr_at(2000, &c).unwrap(), 2.5e-4);
        assert_eq!(lr_at(52_000, &c).unwrap(), 2.5e-4);
        assert!(lr_at(100_001, &c).is_err());
    }

    #[test]
    fn schedule_peaks_at_warmup() {
        let c = OptimizerConfig {
            warmup_updates: 7,
            max_updates: 30,
            ..Default::default()
        };
        let lrs: Vec<f64> = (0..=30).map(|s| lr_at(s, &c).unwrap()).collect();
        let argmax = (0..lrs.len()).max_by(|&a, &b| lrs[a].total_cmp(&lrs[b])).unwrap();
        assert_eq!(argmax, 7);
        for w in lrs.windows(2).take(7) {
            assert!(w[1] > w[0]);
        }
        for w in lrs.windows(2).skip(7) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let zero = OptimizerConfig {
            max_updates: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_ok());
        assert_eq!(lr_at(0, &zero).unwrap(), 0.0);
        for bad in [
            OptimizerConfig { warmup_updates: 10, max_updates: 10, ..Default::default() },
            OptimizerConfig { peak_lr: 0.0, ..Default::default() },
            OptimizerConfig { beta2: 1.0, ..Default::default() },
            OptimizerConfig { epsilon: 0.0, ..Default::default() },
            OptimizerConfig { clip_norm: Some(-1.0), ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
