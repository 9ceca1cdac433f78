use std::collections::hash_map::DefaultHasher;
use std::f64::consts::TAU;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{randn, Matrix, Op, Rng};

/// Concatenated Fourier features.
///
/// Each scale `σ_s` owns a fixed projection `B_s` (`f x c`, `f = dff / 2S`) with
/// entries drawn from `N(0, σ_s²)`. The output for a time-index row `τ` is
/// `[sin(2πB₁τ), cos(2πB₁τ), …, sin(2πB_Sτ), cos(2πB_Sτ)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CffLayer {
    scales: Vec<f64>,
    projections: Vec<Matrix>,
    dff: usize,
    input_dim: usize,
}

impl CffLayer {
    pub fn new(scales: &[f64], dff: usize, input_dim: usize, rng: &mut Rng) -> Result<Self> {
        if scales.is_empty() || dff == 0 || dff % (2 * scales.len()) != 0 {
            return Err(Error::InvalidConfig(format!(
                "Fourier width {dff} is not divisible by 2 x {} scales",
                scales.len()
            )));
        }
        let per_scale = dff / (2 * scales.len());
        let projections = scales
            .iter()
            .map(|&sigma| randn(rng, per_scale, input_dim, sigma))
            .collect();
        Ok(Self {
            scales: scales.to_vec(),
            projections,
            dff,
            input_dim,
        })
    }

    /// Builds a layer from explicit projection matrices.
    pub fn from_projections(scales: Vec<f64>, projections: Vec<Matrix>) -> Result<Self> {
        let first = projections
            .first()
            .ok_or_else(|| Error::InvalidConfig("no Fourier projections".into()))?;
        let (f, c) = first.shape();
        if scales.len() != projections.len() || projections.iter().any(|p| p.shape() != (f, c)) {
            return Err(Error::ShapeMismatch("Fourier projections must share one shape".into()));
        }
        Ok(Self {
            dff: 2 * f * projections.len(),
            scales,
            projections,
            input_dim: c,
        })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn projections(&self) -> &[Matrix] {
        &self.projections
    }

    pub fn output_dim(&self) -> usize {
        self.dff
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn per_scale(&self) -> usize {
        self.dff / (2 * self.scales.len())
    }

    pub fn forward(&self, tau: &Matrix) -> Result<Matrix> {
        if tau.cols() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "time-index has {} columns, Fourier layer expects {}",
                tau.cols(),
                self.input_dim
            )));
        }
        let n = tau.rows();
        let f = self.per_scale();
        let mut out = Matrix::zeros(n, self.dff);
        for (s, b) in self.projections.iter().enumerate() {
            let proj = Matrix::gemm(Op::N, tau, Op::T, b);
            let off = 2 * f * s;
            for i in 0..n {
                let src = proj.row(i);
                let dst = out.row_mut(i);
                for j in 0..f {
                    let (sin, cos) = (TAU * src[j]).sin_cos();
                    dst[off + j] = sin;
                    dst[off + f + j] = cos;
                }
            }
        }
        Ok(out)
    }

    /// Gradient with respect to the time-index given `∂L/∂γ(τ)`.
    pub fn backward_input(&self, tau: &Matrix, d_out: &Matrix) -> Matrix {
        let n = tau.rows();
        let f = self.per_scale();
        let mut dtau = Matrix::zeros(n, self.input_dim);
        for (s, b) in self.projections.iter().enumerate() {
            let proj = Matrix::gemm(Op::N, tau, Op::T, b);
            let off = 2 * f * s;
            let mut dproj = Matrix::zeros(n, f);
            for i in 0..n {
                let g = d_out.row(i);
                let p = proj.row(i);
                let dst = dproj.row_mut(i);
                for j in 0..f {
                    let (sin, cos) = (TAU * p[j]).sin_cos();
                    dst[j] = TAU * (g[off + j] * cos - g[off + f + j] * sin);
                }
            }
            crate::numkit::gemm_into(Op::N, &dproj, Op::N, b, 1.0, &mut dtau, 1.0);
        }
        dtau
    }

    /// Hash of the exact bit patterns of every projection entry.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for b in &self.projections {
            b.shape().hash(&mut h);
            for x in b.as_slice() {
                x.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}
