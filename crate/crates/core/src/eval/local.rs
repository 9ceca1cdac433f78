use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{HeadKind, TrainConfig};
use crate::error::{Error, Result};
use crate::forecaster::{adam_update, clip_grad_norm, loss_mse_grad, OptimizerState, Task};
use crate::inr::{init_forecaster, inr_backward_params, trunk_forward, Dropout, InrModel, LinearHead};
use crate::numkit::rng::streams;
use crate::numkit::{Matrix, Op, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalOptions {
    /// Epoch counts at which forecasts are recorded; the largest sets the fit length.
    pub epochs: Vec<usize>,
    pub lr: f64,
    /// Evenly spaced validation windows used to pick the epoch count; all when unset.
    pub val_windows: Option<usize>,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            epochs: vec![10, 20, 30, 40, 50],
            lr: 1e-3,
            val_windows: None,
        }
    }
}

impl LocalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.epochs.is_empty() || self.epochs.contains(&0) {
            return Err(Error::InvalidConfig("local epochs must be a non-empty list of positive counts".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("local learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// The untrained network every window starts from.
pub fn local_base_model(cfg: &TrainConfig, index_dim: usize, channels: usize) -> Result<InrModel> {
    let local_cfg = TrainConfig {
        head: HeadKind::Linear,
        ..cfg.clone()
    };
    init_forecaster(&local_cfg, index_dim, channels, &Rng::new(cfg.seed))
}

/// Fits a copy of `base` to one lookback window by Adam on the lookback MSE and
/// returns horizon forecasts after each epoch count in `opts.epochs`.
pub fn fit_window(base: &InrModel, cfg: &TrainConfig, opts: &LocalOptions, task: &Task, rng: &Rng) -> Result<Vec<Matrix>> {
    Ok(fit_window_model(base, cfg, opts, task, rng)?.1)
}

/// [`fit_window`] that also returns the fitted network.
pub fn fit_window_model(
    base: &InrModel,
    cfg: &TrainConfig,
    opts: &LocalOptions,
    task: &Task,
    rng: &Rng,
) -> Result<(InrModel, Vec<Matrix>)> {
    let head_width = base
        .head
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("local fitting needs a model with a linear head".into()))?
        .weight
        .cols();
    if head_width != task.channels() {
        return Err(Error::ShapeMismatch(format!(
            "local head has {head_width} outputs, window has {} channels",
            task.channels()
        )));
    }
    let mut model = base.clone();
    let mut opt = OptimizerState::new(&model, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let l = task.lookback_len();
    let features = model.features(&task.tau)?;
    let fit_features = features.slice_rows(0, l);
    let fit_tau = task.tau.slice_rows(0, l);
    let horizon_features = features.slice_rows(l, features.rows());
    let horizon_tau = task.tau.slice_rows(l, task.tau.rows());

    let max_epoch = *opts.epochs.iter().max().expect("validated non-empty");
    let shuffle = rng.fork(streams::SHUFFLE);
    let dropout = rng.fork(streams::DROPOUT);
    let mut order: Vec<usize> = (0..l).collect();
    let mut out = Vec::with_capacity(opts.epochs.len());
    let mut step = 0u64;
    for epoch in 1..=max_epoch {
        shuffle.fork(epoch as u64).shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            step += 1;
            let x = fit_features.select_rows(batch);
            let t = fit_tau.select_rows(batch);
            let y = task.lookback.select_rows(batch);
            let mut drng = dropout.fork(step);
            let (reprs, cache) = trunk_forward(&model, x, &t, Dropout::Sample(&mut drng))?;
            let head = model.head.as_ref().expect("checked above");
            let preds = head.apply(&reprs);
            let d = loss_mse_grad(&preds, &y)?;
            let d_reprs = Matrix::gemm(Op::N, &d, Op::T, &head.weight);
            let mut grads = inr_backward_params(&model, &cache, &d_reprs)?;
            grads.head = Some(LinearHead {
                weight: Matrix::gemm(Op::T, &reprs, Op::N, &d),
                bias: d.sum_rows(),
            });
            let grads = clip_grad_norm(grads, cfg.max_grad_norm)?;
            adam_update(&mut opt, &mut model, &grads, opts.lr, 0.0)?;
        }
        if opts.epochs.contains(&epoch) {
            let (reprs, _) = trunk_forward(&model, horizon_features.clone(), &horizon_tau, Dropout::Off)?;
            let preds = model.head.as_ref().expect("checked above").apply(&reprs);
            preds.ensure_finite("local forecast")?;
            out.push((epoch, preds));
        }
    }
    // Report in the order the epochs were requested.
    let preds = opts
        .epochs
        .iter()
        .map(|e| out.iter().find(|(k, _)| k == e).expect("recorded").1.clone())
        .collect();
    Ok((model, preds))
}

/// Local forecasts for every task: `result[k][i]` is task `i` after `opts.epochs[k]` epochs.
///
/// Windows are fitted in parallel; each uses a random stream derived from its
/// position, so results do not depend on the thread count.
pub fn local_forecasts(cfg: &TrainConfig, opts: &LocalOptions, tasks: &[Task], stream: u64) -> Result<Vec<Vec<Matrix>>> {
    opts.validate()?;
    let first = tasks.first().ok_or_else(|| Error::InvalidConfig("no windows to fit".into()))?;
    let base = local_base_model(cfg, first.index_dim(), first.channels())?;
    let root = Rng::new(cfg.seed).fork(stream);
    let per_task: Vec<Vec<Matrix>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, t)| fit_window(&base, cfg, opts, t, &root.fork(i as u64)))
        .collect::<Result<_>>()?;
    Ok((0..opts.epochs.len())
        .map(|k| per_task.iter().map(|p| p[k].clone()).collect())
        .collect())
}

/// Evenly spaced subset of `n` indices, keeping the first.
pub fn spread_indices(total: usize, n: usize) -> Vec<usize> {
    if n >= total {
        return (0..total).collect();
    }
    (0..n).map(|i| i * total / n).collect()
}
