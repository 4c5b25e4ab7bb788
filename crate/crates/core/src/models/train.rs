//! Mini-batch training loop shared by the quantile and attention models.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::AttentionDims;
use super::mlp::QuantileDims;
use super::optim::{lr_at, AdamState, AdamW};
use crate::fmt::g17;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub patience: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub smooth_l1_beta: f64,
    pub attention: AttentionDims,
    pub quantile: QuantileDims,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 40,
            batch_size: 64,
            base_lr: 3e-4,
            warmup_steps: 100,
            patience: 6,
            seed: 0,
            weight_decay: 0.01,
            smooth_l1_beta: 1.0,
            attention: AttentionDims::default(),
            quantile: QuantileDims::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("max_epochs and batch_size must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid("base_lr must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay must be >= 0"));
        }
        if !(self.smooth_l1_beta > 0.0) {
            return Err(Error::invalid("smooth_l1_beta must be > 0"));
        }
        self.attention.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochStatus {
    Improved,
    NoImprovement,
    EarlyStop,
}

impl EpochStatus {
    pub fn name(self) -> &'static str {
        match self {
            EpochStatus::Improved => "improved",
            EpochStatus::NoImprovement => "no_improvement",
            EpochStatus::EarlyStop => "early_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-example training loss over the epoch.
    pub train_loss: f64,
    pub val_mae: f64,
    pub val_loss: f64,
    /// Learning rate of the epoch's last update.
    pub lr: f64,
    pub status: EpochStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub steps: usize,
}

pub fn write_training_log<W: Write>(history: &TrainHistory, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["epoch", "train_loss", "val_mae", "val_loss", "lr", "status"])?;
    for e in &history.epochs {
        wtr.write_record([
            e.epoch.to_string(),
            g17(e.train_loss),
            g17(e.val_mae),
            g17(e.val_loss),
            g17(e.lr),
            e.status.name().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Validation summary for one set of weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ValScore {
    /// Drives early stopping; lower is better.
    pub criterion: f64,
    pub mae: f64,
    pub loss: f64,
}

/// Runs epochs of shuffled mini-batch AdamW with early stopping and restores
/// the best weights.
///
/// `example` adds one example's gradient to its buffer and returns its loss.
/// Gradients are summed in batch order, then averaged.
pub(crate) fn run_training<E, V>(
    params: &mut Vec<f64>,
    n_train: usize,
    cfg: &TrainConfig,
    mut example: E,
    mut validate: V,
) -> Result<TrainHistory>
where
    E: FnMut(&[f64], usize, &mut [f64]) -> Result<f64>,
    V: FnMut(&[f64]) -> Result<ValScore>,
{
    cfg.validate()?;
    if n_train == 0 {
        return Err(Error::Empty("no training examples"));
    }
    let batches_per_epoch = n_train.div_ceil(cfg.batch_size);
    let total_steps = cfg.max_epochs * batches_per_epoch;
    let opt = AdamW {
        weight_decay: cfg.weight_decay,
        ..AdamW::default()
    };
    let mut state = AdamState::new(params.len());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut grad = vec![0.0; params.len()];

    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        steps: 0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0usize;
    let mut step = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let diverged = Error::Diverged { epoch, step };
            grad.fill(0.0);
            for &i in batch {
                let l = example(params, i, &mut grad).map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch, step },
                    other => other,
                })?;
                if !l.is_finite() {
                    return Err(diverged);
                }
                loss_sum += l;
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            lr = lr_at(step, cfg.base_lr, cfg.warmup_steps, total_steps);
            opt.step(params, &grad, &mut state, step, lr).map_err(|_| diverged)?;
        }
        let val = validate(params).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { epoch, step },
            other => other,
        })?;
        let improved = best.as_ref().is_none_or(|(b, _)| val.criterion < *b);
        let status = if improved {
            best = Some((val.criterion, params.clone()));
            history.best_epoch = epoch;
            since_best = 0;
            EpochStatus::Improved
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                EpochStatus::EarlyStop
            } else {
                EpochStatus::NoImprovement
            }
        };
        history.epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / n_train as f64,
            val_mae: val.mae,
            val_loss: val.loss,
            lr,
            status,
        });
        if status == EpochStatus::EarlyStop {
            break;
        }
    }
    history.steps = step;
    if let Some((_, p)) = best {
        *params = p;
    }
    Ok(history)
}
