#![allow(dead_code)]

use deeptime::numkit::Matrix;

/// Central difference of `f` along every entry of `x`.
pub fn central_diff(x: &Matrix, h: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.as_slice().len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let up = f(&probe);
        probe.as_mut_slice()[i] = orig - h;
        let down = f(&probe);
        probe.as_mut_slice()[i] = orig;
        out.as_mut_slice()[i] = (up - down) / (2.0 * h);
    }
    out
}

pub fn central_diff_scalar(x: f64, h: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Largest entrywise `|a - b| / max(1, |a|, |b|)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Frobenius inner product.
pub fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

use deeptime::inr::{GradientSet, InrModel};

/// Central differences of `loss` over every trainable tensor of `model` and
/// over `lambda_raw`; returns the worst mixed relative error against `grads`.
pub fn model_fd_error(model: &InrModel, grads: &GradientSet, h: f64, loss: impl Fn(&InrModel) -> f64) -> f64 {
    let mut probe = model.clone();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut worst = 0.0f64;
    for (ti, g) in analytic.iter().enumerate() {
        let mut fd = vec![0.0; g.len()];
        for j in 0..g.len() {
            let orig = probe.tensors()[ti][j];
            probe.tensors_mut()[ti][j] = orig + h;
            let up = loss(&probe);
            probe.tensors_mut()[ti][j] = orig - h;
            let down = loss(&probe);
            probe.tensors_mut()[ti][j] = orig;
            fd[j] = (up - down) / (2.0 * h);
        }
        worst = worst.max(max_rel_err(g, &fd));
    }
    let orig = probe.lambda_raw;
    probe.lambda_raw = orig + h;
    let up = loss(&probe);
    probe.lambda_raw = orig - h;
    let down = loss(&probe);
    let fd = (up - down) / (2.0 * h);
    worst.max(max_rel_err(&[grads.lambda_raw], &[fd]))
}
