//! Dense linear algebra, seeded sampling and the differentiable ridge head.

pub mod linalg;
pub mod matrix;
pub mod ridge;
pub mod rng;

pub use linalg::{spd_solve, Cholesky};
pub use matrix::{gemm_into, Matrix, Op};
pub use ridge::{apply_head, ridge_backward, ridge_fit, RidgeBranch, RidgeFit, RidgeGrads, RidgeSolution};
pub use rng::{rand_uniform, randn, Rng};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`], the logistic function.
pub fn softplus_grad(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
