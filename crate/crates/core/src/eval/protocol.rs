use std::sync::atomic::{AtomicUsize, Ordering};

use crate::config::TrainConfig;
use crate::data::{
    chrono_split, datetime_features_selected, features_for_step, median_step_seconds, windows_with, DatetimeFeature, SplitSpec,
    Standardizer, SyntheticData, TimeSeries,
};
use crate::error::{Error, Result};
use crate::forecaster::{train, Task, TrainReport};
use crate::inr::{init_forecaster, InrModel};
use crate::numkit::{Matrix, Rng};

/// Calendar features for each split, aligned row for row.
#[derive(Debug, Clone)]
pub struct SplitExtras {
    pub features: Vec<DatetimeFeature>,
    pub train: Matrix,
    pub val: Matrix,
    pub test: Matrix,
}

/// A standardized chronological split whose test part is only reachable
/// through a counting accessor.
#[derive(Debug)]
pub struct PreparedSeries {
    pub name: String,
    pub train: TimeSeries,
    pub val: TimeSeries,
    test: TimeSeries,
    pub standardizer: Standardizer,
    pub extras: Option<SplitExtras>,
    test_accesses: AtomicUsize,
}

/// Calendar features suited to the sampling step of `ts`.
pub fn select_datetime_features(ts: &TimeSeries) -> Result<Vec<DatetimeFeature>> {
    let stamps = ts
        .timestamps
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("{}: datetime features need a parseable date column", ts.name)))?;
    let step = median_step_seconds(stamps)
        .filter(|s| *s > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{}: cannot infer a sampling step from timestamps", ts.name)))?;
    Ok(features_for_step(step))
}

/// Calendar feature matrix of `ts` for an explicit feature list.
pub fn datetime_matrix(ts: &TimeSeries, features: &[DatetimeFeature]) -> Result<Matrix> {
    let stamps = ts
        .timestamps
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("{}: datetime features need a parseable date column", ts.name)))?;
    Ok(datetime_features_selected(stamps, features))
}

impl PreparedSeries {
    /// Splits `ts`, fits the standardizer on the training part and applies it everywhere.
    pub fn new(ts: &TimeSeries, split: &SplitSpec, datetime: bool) -> Result<Self> {
        let features = if datetime { Some(select_datetime_features(ts)?) } else { None };
        Self::with_features(ts, split, features)
    }

    /// As [`PreparedSeries::new`] with an explicit calendar feature list.
    pub fn with_features(ts: &TimeSeries, split: &SplitSpec, features: Option<Vec<DatetimeFeature>>) -> Result<Self> {
        let (train, val, test) = chrono_split(ts, split)?;
        let standardizer = Standardizer::fit(&train)?;
        let extras = if let Some(features) = features {
            Some(SplitExtras {
                train: datetime_matrix(&train, &features)?,
                val: datetime_matrix(&val, &features)?,
                test: datetime_matrix(&test, &features)?,
                features,
            })
        } else {
            None
        };
        Ok(Self {
            name: ts.name.clone(),
            train: standardizer.apply(&train)?,
            val: standardizer.apply(&val)?,
            test: standardizer.apply(&test)?,
            standardizer,
            extras,
            test_accesses: AtomicUsize::new(0),
        })
    }

    /// The standardized test split; every call is counted.
    pub fn test(&self) -> &TimeSeries {
        self.test_accesses.fetch_add(1, Ordering::SeqCst);
        &self.test
    }

    pub fn test_extra(&self) -> Option<&Matrix> {
        self.extras.as_ref().map(|e| &e.test)
    }

    pub fn test_accesses(&self) -> usize {
        self.test_accesses.load(Ordering::SeqCst)
    }

    pub fn channels(&self) -> usize {
        self.train.channels()
    }

    /// Width of the time-index: the relative index plus any calendar features.
    pub fn index_dim(&self) -> usize {
        1 + self.extras.as_ref().map_or(0, |e| e.features.len())
    }

    pub fn train_tasks(&self, lookback: usize, horizon: usize) -> Result<Vec<Task>> {
        windows_with(&self.train, lookback, horizon, self.extras.as_ref().map(|e| &e.train))
    }

    pub fn val_tasks(&self, lookback: usize, horizon: usize) -> Result<Vec<Task>> {
        windows_with(&self.val, lookback, horizon, self.extras.as_ref().map(|e| &e.val))
    }
}

/// Initializes and meta-trains a model on a prepared series with `L = mu * H`.
pub fn fit_series(cfg: &TrainConfig, data: &PreparedSeries) -> Result<(InrModel, TrainReport)> {
    let (l, h) = (cfg.lookback(), cfg.horizon);
    let train_tasks = data.train_tasks(l, h)?;
    let val_tasks = data.val_tasks(l, h)?;
    let model = init_forecaster(cfg, data.index_dim(), data.channels(), &Rng::new(cfg.seed))?;
    train(model, &train_tasks, &val_tasks, cfg)
}

/// Fraction of synthetic training tasks held out for validation.
pub const SYNTHETIC_VAL_FRACTION: f64 = 0.1;

/// Training tasks and held-out validation tasks (the final tenth) of a synthetic set.
pub fn synthetic_split(data: &SyntheticData) -> Result<(Vec<Task>, Vec<Task>)> {
    let mut tasks = data.train_tasks();
    let n_val = ((tasks.len() as f64) * SYNTHETIC_VAL_FRACTION).round() as usize;
    if n_val == 0 || n_val >= tasks.len() {
        return Err(Error::SplitTooSmall(format!(
            "{} synthetic training tasks cannot spare a validation tenth",
            tasks.len()
        )));
    }
    let val = tasks.split_off(tasks.len() - n_val);
    Ok((tasks, val))
}

/// Training setup for the synthetic families: a narrow trunk, small batches,
/// no dropout and a horizon matching the task layout.
pub fn synthetic_train_config() -> TrainConfig {
    TrainConfig {
        layer_size: 64,
        batch_size: 32,
        dropout: 0.0,
        horizon: 200,
        ..Default::default()
    }
}

/// Meta-trains on a synthetic set, validating on its held-out tenth.
pub fn fit_synthetic(cfg: &TrainConfig, data: &SyntheticData) -> Result<(InrModel, TrainReport)> {
    let (train_tasks, val_tasks) = synthetic_split(data)?;
    let model = init_forecaster(cfg, 1, 1, &Rng::new(cfg.seed))?;
    train(model, &train_tasks, &val_tasks, cfg)
}
