use std::ops::Range;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecaster::Task;
use crate::numkit::Matrix;

/// An ordered `T x m` series with optional timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub columns: Vec<String>,
    pub values: Matrix,
    pub timestamps: Option<Vec<NaiveDateTime>>,
    pub normalization: Option<Standardizer>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Matrix) -> Self {
        let columns = (0..values.cols()).map(|j| format!("c{j}")).collect();
        Self {
            name: name.into(),
            columns,
            values,
            timestamps: None,
            normalization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    /// Rows `start..end`, keeping timestamps and normalization.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeries {
        TimeSeries {
            name: self.name.clone(),
            columns: self.columns.clone(),
            values: self.values.slice_rows(start, end),
            timestamps: self.timestamps.as_ref().map(|t| t[start..end].to_vec()),
            normalization: self.normalization.clone(),
        }
    }
}

/// Chronological train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    /// The 60/20/20 split used for ETTm2.
    pub fn ettm2() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(*p >= 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be >= 0 and sum to 1, got {}/{}/{}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Row counts: floor for train and validation, remainder to test.
    pub fn sizes(&self, total: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error such as 10 * 0.7 = 7.000000000000001
        // or 0.1 * 30 = 3.0000000000000004.
        let floor = |f: f64| ((total as f64) * f + 1e-9).floor() as usize;
        let train = floor(self.train).min(total);
        let val = floor(self.val).min(total - train);
        (train, val, total - train - val)
    }
}

/// Contiguous prefix/middle/suffix split without shuffling.
pub fn chrono_split(ts: &TimeSeries, spec: &SplitSpec) -> Result<(TimeSeries, TimeSeries, TimeSeries)> {
    spec.validate()?;
    let (a, b, _) = spec.sizes(ts.len());
    Ok((ts.slice(0, a), ts.slice(a, a + b), ts.slice(a + b, ts.len())))
}

/// Per-channel z-scoring with statistics from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose training variance was zero; their std is set to 1.
    pub zero_variance: Vec<usize>,
}

impl Standardizer {
    /// Population mean and standard deviation of every channel.
    pub fn fit(train: &TimeSeries) -> Result<Self> {
        let (n, m) = train.values.shape();
        if n == 0 {
            return Err(Error::SplitTooSmall("cannot standardize an empty training split".into()));
        }
        let mean: Vec<f64> = train.values.sum_rows().iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; m];
        for i in 0..n {
            for (j, x) in train.values.row(i).iter().enumerate() {
                var[j] += (x - mean[j]).powi(2);
            }
        }
        let mut zero_variance = Vec::new();
        let std = var
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    zero_variance.push(j);
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std, zero_variance })
    }

    pub fn apply_values(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for i in 0..out.rows() {
            for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                *x = (*x - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn invert_values(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for i in 0..out.rows() {
            for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                *x = *x * self.std[j] + self.mean[j];
            }
        }
        out
    }

    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        if ts.channels() != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "series has {} channels, standardizer {}",
                ts.channels(),
                self.mean.len()
            )));
        }
        Ok(TimeSeries {
            values: self.apply_values(&ts.values),
            normalization: Some(self.clone()),
            ..ts.clone()
        })
    }

    pub fn invert(&self, ts: &TimeSeries) -> TimeSeries {
        TimeSeries {
            values: self.invert_values(&ts.values),
            normalization: None,
            ..ts.clone()
        }
    }
}

pub fn fit_standardizer(train: &TimeSeries) -> Result<Standardizer> {
    Standardizer::fit(train)
}

/// Number of stride-1 windows in a series of length `len`.
pub fn window_count(len: usize, lookback: usize, horizon: usize) -> usize {
    (len + 1).saturating_sub(lookback + horizon)
}

/// All stride-1 lookback/horizon pairs fully contained in `ts`.
pub fn windows(ts: &TimeSeries, lookback: usize, horizon: usize) -> Result<Vec<Task>> {
    windows_with(ts, lookback, horizon, None)
}

/// [`windows`] with optional per-row extra time features (`T x k`).
pub fn windows_with(ts: &TimeSeries, lookback: usize, horizon: usize, extra: Option<&Matrix>) -> Result<Vec<Task>> {
    let end = ts.len().saturating_sub(horizon) + 1;
    windows_range(ts, lookback, horizon, extra, lookback..end.max(lookback))
}

/// The windows of [`windows_with`] whose horizon starts at a row in `starts`.
pub fn windows_range(
    ts: &TimeSeries,
    lookback: usize,
    horizon: usize,
    extra: Option<&Matrix>,
    starts: Range<usize>,
) -> Result<Vec<Task>> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("lookback and horizon must be >= 1".into()));
    }
    let t = ts.len();
    if t < lookback + horizon {
        return Err(Error::SplitTooSmall(format!(
            "{}: {t} rows cannot hold a window of {lookback} + {horizon}",
            ts.name
        )));
    }
    if let Some(e) = extra {
        if e.rows() != t {
            return Err(Error::ShapeMismatch("extra features must have one row per observation".into()));
        }
    }
    let first = starts.start.max(lookback);
    let last = starts.end.min(t - horizon + 1);
    (first..last.max(first))
        .map(|start| {
            let lb = ts.values.slice_rows(start - lookback, start);
            let hz = ts.values.slice_rows(start, start + horizon);
            let ex = extra.map(|e| e.slice_rows(start - lookback, start + horizon));
            Task::with_extra_features(lb, hz, ex, start)
        })
        .collect()
}
