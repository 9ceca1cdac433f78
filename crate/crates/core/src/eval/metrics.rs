use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

fn check(preds: &Matrix, target: &Matrix) -> Result<()> {
    if preds.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs targets {:?}",
            preds.shape(),
            target.shape()
        )));
    }
    if preds.as_slice().is_empty() {
        return Err(Error::ShapeMismatch("metrics need at least one entry".into()));
    }
    Ok(())
}

pub fn mse(preds: &Matrix, target: &Matrix) -> Result<f64> {
    check(preds, target)?;
    let n = preds.as_slice().len() as f64;
    Ok(preds.as_slice().iter().zip(target.as_slice()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n)
}

pub fn mae(preds: &Matrix, target: &Matrix) -> Result<f64> {
    check(preds, target)?;
    let n = preds.as_slice().len() as f64;
    Ok(preds.as_slice().iter().zip(target.as_slice()).map(|(p, t)| (p - t).abs()).sum::<f64>() / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    /// Row of the first horizon step in the source series (task index for synthetic sets).
    pub start: usize,
    pub mse: f64,
    pub mae: f64,
}

/// Errors averaged over every window, horizon step and channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub n_windows: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_window: Option<Vec<WindowMetrics>>,
}

/// Running sums, so windows of unequal size are weighted by their entry count.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    squared: f64,
    absolute: f64,
    entries: usize,
    windows: usize,
    per_window: Option<Vec<WindowMetrics>>,
}

impl MetricsAccumulator {
    pub fn new(keep_per_window: bool) -> Self {
        Self {
            per_window: keep_per_window.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn add(&mut self, start: usize, preds: &Matrix, target: &Matrix) -> Result<()> {
        check(preds, target)?;
        let (mut sq, mut ab) = (0.0, 0.0);
        for (p, t) in preds.as_slice().iter().zip(target.as_slice()) {
            let e = p - t;
            sq += e * e;
            ab += e.abs();
        }
        if !(sq.is_finite() && ab.is_finite()) {
            return Err(Error::NonFinite(format!("forecast error for window {start}")));
        }
        let n = preds.as_slice().len();
        self.squared += sq;
        self.absolute += ab;
        self.entries += n;
        self.windows += 1;
        if let Some(w) = &mut self.per_window {
            w.push(WindowMetrics {
                start,
                mse: sq / n as f64,
                mae: ab / n as f64,
            });
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Metrics> {
        if self.entries == 0 {
            return Err(Error::SplitTooSmall("no windows were evaluated".into()));
        }
        let n = self.entries as f64;
        Ok(Metrics {
            mse: self.squared / n,
            mae: self.absolute / n,
            n_windows: self.windows,
            per_window: self.per_window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{randn, Rng};

    #[test]
    fn equal_inputs_are_zero() {
        let a = Matrix::from_rows(&[&[1.0, -2.0], &[3.0, 4.0]]);
        assert_eq!((mse(&a, &a).unwrap(), mae(&a, &a).unwrap()), (0.0, 0.0));
    }

    #[test]
    fn constant_offset() {
        let t = Matrix::from_rows(&[&[1.0, 2.0, 3.0]]);
        let p = t.map(|x| x - 2.0);
        assert_eq!(mse(&p, &t).unwrap(), 4.0);
        assert_eq!(mae(&p, &t).unwrap(), 2.0);
    }

    #[test]
    fn mae_bounded_by_root_mse() {
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let p = randn(&mut rng, 7, 3, 2.0);
            let t = randn(&mut rng, 7, 3, 1.0);
            assert!(mae(&p, &t).unwrap() <= mse(&p, &t).unwrap().sqrt() + 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(matches!(mse(&Matrix::zeros(2, 1), &Matrix::zeros(1, 2)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn accumulator_weights_by_entries() {
        let mut acc = MetricsAccumulator::new(true);
        acc.add(0, &Matrix::filled(1, 1, 1.0), &Matrix::zeros(1, 1)).unwrap();
        acc.add(1, &Matrix::zeros(3, 1), &Matrix::zeros(3, 1)).unwrap();
        let m = acc.finish().unwrap();
        assert_eq!(m.mse, 0.25);
        assert_eq!(m.n_windows, 2);
        assert_eq!(m.per_window.unwrap()[0].mse, 1.0);
    }
}
