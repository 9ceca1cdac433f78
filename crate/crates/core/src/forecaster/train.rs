use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::forward::{batch_loss_grad, forecast_many_shared, loss_mse, SharedIndex};
use super::optim::{adam_update, clip_grad_norm, lr_at, OptimizerState};
use super::task::Task;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::inr::InrModel;
use crate::numkit::rng::streams;
use crate::numkit::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Trunk learning rate at the last step of each epoch.
    pub lr: Vec<f64>,
    pub lambda_lr: Vec<f64>,
    pub lambda: Vec<f64>,
    /// 1-based epoch at which training ended.
    pub stopped_epoch: usize,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub steps: usize,
    /// Wall-clock seconds per epoch; the only nondeterministic field.
    pub epoch_seconds: Vec<f64>,
}

impl TrainReport {
    /// Copy with timing fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            epoch_seconds: vec![0.0; self.epoch_seconds.len()],
            ..self.clone()
        }
    }
}

/// Patience counter over validation losses.
///
/// Training stops once more than `patience` consecutive epochs fail to improve
/// on the best loss seen.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Records the loss for `epoch`; returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            (true, false)
        } else {
            self.bad_epochs += 1;
            (false, self.bad_epochs > self.patience)
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// Mean horizon MSE over `tasks` in eval mode.
pub fn validation_loss(model: &InrModel, tasks: &[Task], shared: Option<&SharedIndex>) -> Result<f64> {
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("no validation tasks".into()));
    }
    let preds = forecast_many_shared(model, tasks, shared)?;
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(tasks) {
        total += loss_mse(p, &t.horizon)?;
    }
    Ok(total / tasks.len() as f64)
}

fn common_index(model: &InrModel, tasks: &[Task]) -> Result<Option<SharedIndex>> {
    let Some(first) = tasks.iter().find(|t| !t.has_extra_features) else {
        return Ok(None);
    };
    Ok(Some(SharedIndex::new(model, first.lookback_len(), first.horizon_len())?))
}

/// Meta-trains `model` and returns the best-validation snapshot.
pub fn train(model: InrModel, train_tasks: &[Task], val_tasks: &[Task], cfg: &TrainConfig) -> Result<(InrModel, TrainReport)> {
    if val_tasks.is_empty() {
        return Err(Error::InvalidConfig("no validation tasks".into()));
    }
    let val_index = common_index(&model, val_tasks)?;
    train_with_validator(model, train_tasks, cfg, |m, _| validation_loss(m, val_tasks, val_index.as_ref()))
}

/// Training loop with a caller-supplied validation metric (lower is better).
pub fn train_with_validator(
    mut model: InrModel,
    train_tasks: &[Task],
    cfg: &TrainConfig,
    mut validate: impl FnMut(&InrModel, usize) -> Result<f64>,
) -> Result<(InrModel, TrainReport)> {
    cfg.validate()?;
    if train_tasks.is_empty() {
        return Err(Error::InvalidConfig("no training tasks".into()));
    }
    let root = Rng::new(cfg.seed);
    let shuffle_rng = root.fork(streams::SHUFFLE);
    let dropout_rng = root.fork(streams::DROPOUT);
    let shared = common_index(&model, train_tasks)?;

    let steps_per_epoch = train_tasks.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let warmup_steps = steps_per_epoch * cfg.warmup_epochs;
    let mut opt = OptimizerState::new(&model, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_model = model.clone();
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        lr: Vec::new(),
        lambda_lr: Vec::new(),
        lambda: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        steps: 0,
        epoch_seconds: Vec::new(),
    };

    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_tasks.len()).collect();
        shuffle_rng.fork(epoch as u64).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let (mut lr, mut lambda_lr) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let tasks: Vec<&Task> = batch.iter().map(|&i| &train_tasks[i]).collect();
            let mut rng = dropout_rng.fork(step as u64);
            let (loss, grads) = batch_loss_grad(&model, &tasks, shared.as_ref(), cfg.dropout_masks, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, step {step}")));
            }
            let grads = clip_grad_norm(grads, cfg.max_grad_norm)?;
            lr = lr_at(step, total_steps, warmup_steps, cfg.lr);
            lambda_lr = lr_at(step, total_steps, warmup_steps, cfg.lambda_lr);
            adam_update(&mut opt, &mut model, &grads, lr, lambda_lr)?;
            epoch_loss += loss * batch.len() as f64;
        }
        let val = validate(&model, epoch)?;
        if !val.is_finite() {
            return Err(Error::NonFinite(format!("validation loss at epoch {epoch}")));
        }
        report.train_loss.push(epoch_loss / train_tasks.len() as f64);
        report.val_loss.push(val);
        report.lr.push(lr);
        report.lambda_lr.push(lambda_lr);
        report.lambda.push(model.lambda());
        report.epoch_seconds.push(started.elapsed().as_secs_f64());
        report.stopped_epoch = epoch;
        let (improved, stop) = stopper.observe(epoch, val);
        if improved {
            best_model = model.clone();
        }
        if stop {
            break;
        }
    }
    report.steps = step;
    let (best_epoch, best_val) = stopper.best();
    report.best_epoch = best_epoch;
    report.best_val_loss = best_val;
    Ok((best_model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_bookkeeping() {
        let mut s = EarlyStopping::new(2);
        let losses = [5.0, 4.0, 4.5, 4.6, 4.7, 1.0];
        let mut stopped = 0;
        for (i, &l) in losses.iter().enumerate() {
            let (_, stop) = s.observe(i + 1, l);
            if stop {
                stopped = i + 1;
                break;
            }
        }
        assert_eq!(stopped, 5);
        assert_eq!(s.best(), (2, 4.0));
    }

    #[test]
    fn ties_do_not_count_as_improvement() {
        let mut s = EarlyStopping::new(0);
        assert_eq!(s.observe(1, 1.0), (true, false));
        assert_eq!(s.observe(2, 1.0), (false, true));
    }
}
