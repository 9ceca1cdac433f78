use super::Matrix;
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if n == 0 || a.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "cholesky needs a non-empty square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let mut l = Matrix::zeros(n, n);
        let ls = l.as_mut_slice();
        for j in 0..n {
            let s = a[(j, j)] - ls[j * n..j * n + j].iter().map(|x| x * x).sum::<f64>();
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: s });
            }
            let d = s.sqrt();
            ls[j * n + j] = d;
            for i in j + 1..n {
                let dot: f64 = ls[i * n..i * n + j]
                    .iter()
                    .zip(&ls[j * n..j * n + j])
                    .map(|(x, y)| x * y)
                    .sum();
                ls[i * n + j] = (a[(i, j)] - dot) / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// Solves `A X = B` for a row-major right-hand side with any number of columns.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::ShapeMismatch(format!(
                "solve: system is {n}x{n} but right-hand side has {} rows",
                b.rows()
            )));
        }
        let m = b.cols();
        let mut x = b.clone();
        let l = self.l.as_slice();
        let xs = x.as_mut_slice();
        // L y = b
        for i in 0..n {
            let (done, rest) = xs.split_at_mut(i * m);
            let xi = &mut rest[..m];
            for k in 0..i {
                let lik = l[i * n + k];
                if lik != 0.0 {
                    let xk = &done[k * m..(k + 1) * m];
                    xi.iter_mut().zip(xk).for_each(|(a, b)| *a -= lik * b);
                }
            }
            let inv = 1.0 / l[i * n + i];
            xi.iter_mut().for_each(|a| *a *= inv);
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let (head, tail) = xs.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for k in i + 1..n {
                let lki = l[k * n + i];
                if lki != 0.0 {
                    let xk = &tail[(k - i - 1) * m..(k - i) * m];
                    xi.iter_mut().zip(xk).for_each(|(a, b)| *a -= lki * b);
                }
            }
            let inv = 1.0 / l[i * n + i];
            xi.iter_mut().for_each(|a| *a *= inv);
        }
        x.ensure_finite("cholesky solve")?;
        Ok(x)
    }
}

/// Relative asymmetry `max|A - Aᵀ| / (1 + max|A|)`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[(i, j)].abs());
            if j > i {
                worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
    }
    worst / (1.0 + scale)
}

/// Solves `A X = B` for symmetric positive-definite `A` through a Cholesky factorization.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeMismatch(format!(
            "spd_solve: A is {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if asymmetry(a) > 1e-9 {
        return Err(Error::Degenerate("spd_solve: matrix is not symmetric".into()));
    }
    Cholesky::factor(a)?.solve(b)
}
