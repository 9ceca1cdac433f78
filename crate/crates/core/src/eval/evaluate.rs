use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{Metrics, MetricsAccumulator};
use crate::data::{window_count, windows_range, Standardizer, TimeSeries};
use crate::error::{Error, Result};
use crate::forecaster::{forecast_many, Task};
use crate::inr::InrModel;
use crate::numkit::Matrix;

/// Anything that maps windows to horizon forecasts.
pub trait WindowForecaster {
    fn forecast_windows(&self, tasks: &[Task]) -> Result<Vec<Matrix>>;
}

impl WindowForecaster for InrModel {
    fn forecast_windows(&self, tasks: &[Task]) -> Result<Vec<Matrix>> {
        forecast_many(self, tasks)
    }
}

/// Repeats the final lookback row across the horizon.
#[derive(Debug, Clone, Copy, Default)]
pub struct LastValue;

impl LastValue {
    pub fn forecast(task: &Task) -> Matrix {
        let last = task.lookback.row(task.lookback_len() - 1);
        let mut out = Matrix::zeros(task.horizon_len(), task.channels());
        for i in 0..out.rows() {
            out.row_mut(i).copy_from_slice(last);
        }
        out
    }
}

impl WindowForecaster for LastValue {
    fn forecast_windows(&self, tasks: &[Task]) -> Result<Vec<Matrix>> {
        Ok(tasks.iter().map(LastValue::forecast).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub keep_per_window: bool,
    /// Undo standardization before scoring.
    pub raw_scale: bool,
    /// Windows materialized at once.
    pub chunk: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            keep_per_window: false,
            raw_scale: false,
            chunk: 2048,
        }
    }
}

fn score(
    acc: &mut MetricsAccumulator,
    tasks: &[Task],
    preds: &[Matrix],
    starts: impl Iterator<Item = usize>,
    unscale: Option<&Standardizer>,
) -> Result<()> {
    if preds.len() != tasks.len() {
        return Err(Error::ShapeMismatch("forecaster returned the wrong number of windows".into()));
    }
    for ((task, p), start) in tasks.iter().zip(preds).zip(starts) {
        match unscale {
            Some(s) => acc.add(start, &s.invert_values(p), &s.invert_values(&task.horizon))?,
            None => acc.add(start, p, &task.horizon)?,
        }
    }
    Ok(())
}

/// Scores forecasts for explicit tasks; per-window records are keyed by task position.
pub fn evaluate_tasks(f: &impl WindowForecaster, tasks: &[Task], keep_per_window: bool) -> Result<Metrics> {
    let mut acc = MetricsAccumulator::new(keep_per_window);
    let preds = f.forecast_windows(tasks)?;
    score(&mut acc, tasks, &preds, 0..tasks.len(), None)?;
    acc.finish()
}

/// Scores every stride-1 window of `test`.
pub fn evaluate(
    f: &impl WindowForecaster,
    test: &TimeSeries,
    extra: Option<&Matrix>,
    lookback: usize,
    horizon: usize,
    opts: &EvalOptions,
) -> Result<Metrics> {
    if window_count(test.len(), lookback, horizon) == 0 {
        return Err(Error::SplitTooSmall(format!(
            "{}: {} rows cannot hold a window of {lookback} + {horizon}",
            test.name,
            test.len()
        )));
    }
    let unscale = if opts.raw_scale {
        Some(test.normalization.as_ref().ok_or_else(|| {
            Error::InvalidConfig("raw-scale metrics need a standardized series".into())
        })?)
    } else {
        None
    };
    let mut acc = MetricsAccumulator::new(opts.keep_per_window);
    let end = test.len() - horizon + 1;
    let chunk = opts.chunk.max(1);
    let mut start = lookback;
    while start < end {
        let stop = (start + chunk).min(end);
        let tasks = windows_range(test, lookback, horizon, extra, start..stop)?;
        let preds = f.forecast_windows(&tasks)?;
        score(&mut acc, &tasks, &preds, tasks.iter().map(|t| t.start), unscale)?;
        start = stop;
    }
    acc.finish()
}

/// Forecasts for every window of `test`, in window order.
pub fn forecast_series(
    f: &impl WindowForecaster,
    test: &TimeSeries,
    extra: Option<&Matrix>,
    lookback: usize,
    horizon: usize,
) -> Result<(Vec<Task>, Vec<Matrix>)> {
    let tasks = windows_range(test, lookback, horizon, extra, 0..test.len())?;
    let preds = f.forecast_windows(&tasks)?;
    Ok((tasks, preds))
}

/// Writes `window_start,step,channel,y_true,y_pred` rows.
pub fn dump_forecasts(path: &Path, tasks: &[Task], preds: &[Matrix]) -> Result<()> {
    let mut s = String::from("window_start,step,channel,y_true,y_pred\n");
    for (task, p) in tasks.iter().zip(preds) {
        for step in 0..p.rows() {
            for c in 0..p.cols() {
                writeln!(s, "{},{},{},{},{}", task.start, step, c, task.horizon[(step, c)], p[(step, c)]).expect("string write");
            }
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Returns the true horizon of every window.
    struct Oracle;

    impl WindowForecaster for Oracle {
        fn forecast_windows(&self, tasks: &[Task]) -> Result<Vec<Matrix>> {
            Ok(tasks.iter().map(|t| t.horizon.clone()).collect())
        }
    }

    fn series(t: usize) -> TimeSeries {
        let v: Vec<f64> = (0..t).map(|i| ((i * 7919) % 13) as f64).collect();
        TimeSeries::new("s", Matrix::column(&v))
    }

    #[test]
    fn oracle_scores_zero() {
        let m = evaluate(&Oracle, &series(40), None, 5, 3, &EvalOptions::default()).unwrap();
        assert_eq!((m.mse, m.mae, m.n_windows), (0.0, 0.0, 33));
    }

    #[test]
    fn chunking_does_not_change_metrics() {
        let ts = series(60);
        let whole = evaluate(&LastValue, &ts, None, 4, 4, &EvalOptions::default()).unwrap();
        let opts = EvalOptions {
            chunk: 7,
            ..Default::default()
        };
        let chunked = evaluate(&LastValue, &ts, None, 4, 4, &opts).unwrap();
        assert!((whole.mse - chunked.mse).abs() <= 1e-12 * whole.mse);
        assert_eq!(whole.n_windows, chunked.n_windows);
    }

    #[test]
    fn window_order_does_not_matter() {
        let ts = series(30);
        let (mut tasks, _) = forecast_series(&LastValue, &ts, None, 3, 2).unwrap();
        let a = evaluate_tasks(&LastValue, &tasks, false).unwrap();
        tasks.reverse();
        let b = evaluate_tasks(&LastValue, &tasks, false).unwrap();
        assert!((a.mse - b.mse).abs() <= 1e-12 * a.mse.max(1.0));
        assert!((a.mae - b.mae).abs() <= 1e-12 * a.mae.max(1.0));
    }

    #[test]
    fn too_short_split_is_reported() {
        assert!(matches!(
            evaluate(&Oracle, &series(5), None, 4, 4, &EvalOptions::default()),
            Err(Error::SplitTooSmall(_))
        ));
    }

    #[test]
    fn forecast_dump_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let (tasks, preds) = forecast_series(&LastValue, &series(8), None, 2, 2).unwrap();
        dump_forecasts(&path, &tasks, &preds).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "window_start,step,channel,y_true,y_pred");
        assert_eq!(text.lines().count(), 1 + tasks.len() * 2);
    }
}
