use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate, EvalOptions};
use super::metrics::Metrics;
use super::protocol::{fit_series, PreparedSeries};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::inr::InrModel;

/// Lookback multipliers searched by default.
pub const MU_GRID: [usize; 5] = [1, 3, 5, 7, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub mus: Vec<usize>,
    /// Also score every non-selected multiplier on the test split.
    pub full_table: bool,
    pub eval: EvalOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            mus: MU_GRID.to_vec(),
            full_table: false,
            eval: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: usize,
    pub lookback: usize,
    pub best_epoch: usize,
    pub val_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub chosen_mu: usize,
    pub test: Metrics,
    pub test_accesses: usize,
}

/// Index of the smallest validation loss; the first wins ties.
pub fn select_best(val_losses: &[f64]) -> Result<usize> {
    if val_losses.is_empty() {
        return Err(Error::InvalidConfig("nothing to select from".into()));
    }
    if let Some(i) = val_losses.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("validation loss of candidate {i}")));
    }
    let mut best = 0;
    for (i, v) in val_losses.iter().enumerate() {
        if *v < val_losses[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Trains one model per multiplier, selects on validation loss and scores the
/// selection on the test split. Returns the result and the chosen model.
pub fn sweep_mu(cfg: &TrainConfig, data: &PreparedSeries, opts: &SweepOptions) -> Result<(SweepResult, InrModel)> {
    sweep_with(cfg, data, opts, fit_series)
}

/// [`sweep_mu`] with a pluggable fit function, returning `(model, best validation loss, best epoch)`.
pub fn sweep_with(
    cfg: &TrainConfig,
    data: &PreparedSeries,
    opts: &SweepOptions,
    mut fit: impl FnMut(&TrainConfig, &PreparedSeries) -> Result<(InrModel, crate::forecaster::TrainReport)>,
) -> Result<(SweepResult, InrModel)> {
    if opts.mus.is_empty() || opts.mus.contains(&0) {
        return Err(Error::InvalidConfig("sweep multipliers must be a non-empty list of positive integers".into()));
    }
    let mut rows = Vec::with_capacity(opts.mus.len());
    let mut models = Vec::with_capacity(opts.mus.len());
    for &mu in &opts.mus {
        let run_cfg = TrainConfig {
            lookback_multiplier: mu,
            ..cfg.clone()
        };
        let (model, report) = fit(&run_cfg, data)?;
        rows.push(SweepRow {
            mu,
            lookback: run_cfg.lookback(),
            best_epoch: report.best_epoch,
            val_loss: report.best_val_loss,
            test: None,
        });
        models.push(model);
    }
    let losses: Vec<f64> = rows.iter().map(|r| r.val_loss).collect();
    let best = select_best(&losses)?;
    for (i, row) in rows.iter_mut().enumerate() {
        if i == best || opts.full_table {
            row.test = Some(evaluate(
                &models[i],
                data.test(),
                data.test_extra(),
                row.lookback,
                cfg.horizon,
                &opts.eval,
            )?);
        }
    }
    let result = SweepResult {
        chosen_mu: rows[best].mu,
        test: rows[best].test.clone().expect("chosen row was scored"),
        rows,
        test_accesses: data.test_accesses(),
    };
    Ok((result, models.swap_remove(best)))
}
