//! Differentiable closed-form ridge regression.
//!
//! `W = argmin ‖Z′W − Y‖² + λ‖W‖²` where `Z′` is `Z` with an optional all-ones
//! column appended. The bias row is regularized like every other row. When
//! there are fewer samples than augmented features the dual (Woodbury) form
//! `W = Z′ᵀ(Z′Z′ᵀ + λI)⁻¹Y` is used, which keeps the factorized system at
//! `min(n, d′)` rows.

use super::linalg::Cholesky;
use super::{Matrix, Op};
use crate::error::{Error, Result};

/// Which normal-equation form to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RidgeBranch {
    /// Woodbury when `n < d′`, standard otherwise.
    #[default]
    Auto,
    Standard,
    Woodbury,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    /// `d′ x m`; the last row is the bias when the fit was augmented.
    pub weights: Matrix,
    pub used_woodbury: bool,
}

#[derive(Debug, Clone)]
pub struct RidgeGrads {
    pub dz: Matrix,
    pub dy: Matrix,
    pub dlam: f64,
}

/// A solved ridge system that keeps what its adjoint needs.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    z_aug: Matrix,
    y: Matrix,
    with_bias: bool,
    chol: Cholesky,
    weights: Matrix,
    /// `(Z′Z′ᵀ + λI)⁻¹ Y`, only on the Woodbury branch.
    dual: Option<Matrix>,
}

fn factor_checked(mut a: Matrix, lam: f64) -> Result<Cholesky> {
    let max_diag = (0..a.rows()).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    a.add_diagonal(lam);
    let chol = Cholesky::factor(&a).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value } => Error::Degenerate(format!(
            "ridge system not positive definite at pivot {pivot} ({value:e}) with lambda {lam:e}"
        )),
        other => other,
    })?;
    if lam == 0.0 {
        let l = chol.lower();
        let min_pivot = (0..l.rows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-12 * max_diag.max(f64::MIN_POSITIVE) {
            return Err(Error::Degenerate(
                "singular Gram matrix with zero regularization".into(),
            ));
        }
    }
    Ok(chol)
}

impl RidgeFit {
    pub fn new(z: &Matrix, y: &Matrix, lam: f64, with_bias: bool, branch: RidgeBranch) -> Result<Self> {
        let (n, d) = z.shape();
        if n == 0 || d == 0 {
            return Err(Error::ShapeMismatch(format!("ridge: empty design matrix {n}x{d}")));
        }
        if y.rows() != n {
            return Err(Error::ShapeMismatch(format!(
                "ridge: Z has {n} rows but Y has {}",
                y.rows()
            )));
        }
        if !(lam >= 0.0) || !lam.is_finite() {
            return Err(Error::InvalidConfig(format!("ridge: lambda must be finite and >= 0, got {lam}")));
        }
        z.ensure_finite("ridge features")?;
        y.ensure_finite("ridge targets")?;
        let z_aug = if with_bias { z.with_ones_column() } else { z.clone() };
        let d_aug = z_aug.cols();
        let woodbury = match branch {
            RidgeBranch::Auto => n < d_aug,
            RidgeBranch::Standard => false,
            RidgeBranch::Woodbury => true,
        };
        let (chol, weights, dual) = if woodbury {
            let k = Matrix::gemm(Op::N, &z_aug, Op::T, &z_aug);
            let chol = factor_checked(k, lam)?;
            let p = chol.solve(y)?;
            let w = Matrix::gemm(Op::T, &z_aug, Op::N, &p);
            (chol, w, Some(p))
        } else {
            let a = Matrix::gemm(Op::T, &z_aug, Op::N, &z_aug);
            let chol = factor_checked(a, lam)?;
            let b = Matrix::gemm(Op::T, &z_aug, Op::N, y);
            let w = chol.solve(&b)?;
            (chol, w, None)
        };
        weights.ensure_finite("ridge weights")?;
        Ok(Self {
            z_aug,
            y: y.clone(),
            with_bias,
            chol,
            weights,
            dual,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn used_woodbury(&self) -> bool {
        self.dual.is_some()
    }

    pub fn solution(&self) -> RidgeSolution {
        RidgeSolution {
            weights: self.weights.clone(),
            used_woodbury: self.used_woodbury(),
        }
    }

    /// Applies the fitted head to new (unaugmented) features.
    pub fn predict(&self, z: &Matrix) -> Matrix {
        apply_head(z, &self.weights, self.with_bias)
    }

    /// Adjoint of the fit for the cotangent `g = ∂L/∂W`.
    pub fn backward(&self, g: &Matrix) -> Result<RidgeGrads> {
        if g.shape() != self.weights.shape() {
            return Err(Error::ShapeMismatch(format!(
                "ridge backward: cotangent {:?} vs weights {:?}",
                g.shape(),
                self.weights.shape()
            )));
        }
        let z = &self.z_aug;
        let (mut dz_aug, dy, dlam) = match &self.dual {
            None => {
                // W = A⁻¹B, A = Z′ᵀZ′ + λI, B = Z′ᵀY
                let s = self.chol.solve(g)?;
                let mut da = Matrix::gemm(Op::N, &s, Op::T, &self.weights);
                da.scale_inplace(-1.0);
                let dlam = da.trace();
                let sym = symmetrize(&da);
                let mut dz = Matrix::gemm(Op::N, z, Op::N, &sym);
                super::matrix::gemm_into(Op::N, &self.y, Op::T, &s, 1.0, &mut dz, 1.0);
                let dy = Matrix::gemm(Op::N, z, Op::N, &s);
                (dz, dy, dlam)
            }
            Some(p) => {
                // W = Z′ᵀP, P = K⁻¹Y, K = Z′Z′ᵀ + λI
                let mut dz = Matrix::gemm(Op::N, p, Op::T, g);
                let dp = Matrix::gemm(Op::N, z, Op::N, g);
                let q = self.chol.solve(&dp)?;
                let mut dk = Matrix::gemm(Op::N, &q, Op::T, p);
                dk.scale_inplace(-1.0);
                let dlam = dk.trace();
                let sym = symmetrize(&dk);
                super::matrix::gemm_into(Op::N, &sym, Op::N, z, 1.0, &mut dz, 1.0);
                (dz, q, dlam)
            }
        };
        if self.with_bias {
            dz_aug = dz_aug.slice_cols(0, dz_aug.cols() - 1);
        }
        Ok(RidgeGrads {
            dz: dz_aug,
            dy,
            dlam,
        })
    }
}

fn symmetrize(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    out.add_assign(&m.transpose());
    out
}

/// `Z W[..d] + W[d]` when `with_bias`, plain `Z W` otherwise.
pub fn apply_head(z: &Matrix, weights: &Matrix, with_bias: bool) -> Matrix {
    if with_bias {
        let d = z.cols();
        assert_eq!(weights.rows(), d + 1, "head expects {} rows", d + 1);
        let w = weights.slice_rows(0, d);
        let mut out = z.matmul(&w);
        out.add_row_vector(weights.row(d));
        out
    } else {
        z.matmul(weights)
    }
}

pub fn ridge_fit(z: &Matrix, y: &Matrix, lam: f64, with_bias: bool) -> Result<RidgeSolution> {
    Ok(RidgeFit::new(z, y, lam, with_bias, RidgeBranch::Auto)?.solution())
}

pub fn ridge_backward(z: &Matrix, y: &Matrix, lam: f64, with_bias: bool, g: &Matrix) -> Result<RidgeGrads> {
    RidgeFit::new(z, y, lam, with_bias, RidgeBranch::Auto)?.backward(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design_without_regularization() {
        let sol = ridge_fit(&Matrix::identity(2), &Matrix::column(&[2.0, 3.0]), 0.0, false).unwrap();
        assert!(sol.weights.max_abs_diff(&Matrix::column(&[2.0, 3.0])) < 1e-15);
        assert!(!sol.used_woodbury);
    }

    #[test]
    fn scalar_feature_with_unit_lambda() {
        let z = Matrix::column(&[1.0, 2.0, 3.0]);
        let y = Matrix::column(&[2.0, 4.0, 6.0]);
        let sol = ridge_fit(&z, &y, 1.0, false).unwrap();
        assert!((sol.weights[(0, 0)] - 28.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn underdetermined_uses_woodbury() {
        let z = Matrix::from_rows(&[&[1.0, 1.0]]);
        let sol = ridge_fit(&z, &Matrix::column(&[2.0]), 1.0, false).unwrap();
        assert!(sol.used_woodbury);
        assert!(sol.weights.max_abs_diff(&Matrix::column(&[2.0 / 3.0, 2.0 / 3.0])) < 1e-15);
    }

    #[test]
    fn singular_gram_without_lambda_is_degenerate() {
        let z = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]);
        let y = Matrix::column(&[1.0, 2.0, 3.0]);
        assert!(matches!(ridge_fit(&z, &y, 0.0, false), Err(Error::Degenerate(_))));
        assert!(ridge_fit(&z, &y, 0.1, false).is_ok());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let z = Matrix::from_rows(&[&[1.0, 0.5], &[2.0, -1.0], &[0.3, 0.2]]);
        let y = Matrix::from_rows(&[&[1.0], &[0.0], &[2.0]]);
        for bias in [false, true] {
            let fit = RidgeFit::new(&z, &y, 0.7, bias, RidgeBranch::Auto).unwrap();
            let g = Matrix::zeros(fit.weights().rows(), 1);
            let grads = fit.backward(&g).unwrap();
            assert_eq!(grads.dz, Matrix::zeros(3, 2));
            assert_eq!(grads.dy, Matrix::zeros(3, 1));
            assert_eq!(grads.dlam, 0.0);
        }
    }

    #[test]
    fn bias_row_is_regularized() {
        // One constant feature of zero leaves only the bias: w_b = Σy / (n + λ).
        let z = Matrix::zeros(4, 1);
        let y = Matrix::column(&[1.0, 2.0, 3.0, 4.0]);
        let sol = ridge_fit(&z, &y, 2.0, true).unwrap();
        assert!((sol.weights[(1, 0)] - 10.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn shape_errors() {
        let z = Matrix::zeros(3, 2);
        assert!(matches!(
            ridge_fit(&z, &Matrix::zeros(2, 1), 1.0, false),
            Err(Error::ShapeMismatch(_))
        ));
        let fit = RidgeFit::new(&z, &Matrix::zeros(3, 1), 1.0, false, RidgeBranch::Auto).unwrap();
        assert!(fit.backward(&Matrix::zeros(3, 1)).is_err());
    }
}
