use crate::error::{Error, Result};
use crate::inr::make_time_index;
use crate::numkit::Matrix;

/// One lookback/horizon pair with its time-index.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub lookback: Matrix,
    pub horizon: Matrix,
    /// `(L + H) x c`: the relative index in column 0, then any extra features.
    pub tau: Matrix,
    pub has_extra_features: bool,
    /// Row of the first horizon step in the source series.
    pub start: usize,
}

impl Task {
    pub fn new(lookback: Matrix, horizon: Matrix, start: usize) -> Result<Self> {
        Self::with_extra_features(lookback, horizon, None, start)
    }

    pub fn with_extra_features(lookback: Matrix, horizon: Matrix, extra: Option<Matrix>, start: usize) -> Result<Self> {
        let (l, m) = lookback.shape();
        let (h, mh) = horizon.shape();
        if l == 0 || h == 0 || m != mh {
            return Err(Error::ShapeMismatch(format!(
                "task lookback {l}x{m} and horizon {h}x{mh} are incompatible"
            )));
        }
        lookback.ensure_finite("task lookback")?;
        horizon.ensure_finite("task horizon")?;
        let index = make_time_index(l, h);
        let (tau, has_extra) = match extra {
            Some(e) => {
                if e.rows() != l + h {
                    return Err(Error::ShapeMismatch(format!(
                        "extra features have {} rows, expected {}",
                        e.rows(),
                        l + h
                    )));
                }
                e.ensure_finite("task extra features")?;
                (Matrix::hstack(&[&index, &e])?, true)
            }
            None => (index, false),
        };
        Ok(Self {
            lookback,
            horizon,
            tau,
            has_extra_features: has_extra,
            start,
        })
    }

    pub fn lookback_len(&self) -> usize {
        self.lookback.rows()
    }

    pub fn horizon_len(&self) -> usize {
        self.horizon.rows()
    }

    pub fn channels(&self) -> usize {
        self.lookback.cols()
    }

    pub fn index_dim(&self) -> usize {
        self.tau.cols()
    }
}
