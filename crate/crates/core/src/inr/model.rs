use serde::{Deserialize, Serialize};

use super::cff::CffLayer;
use crate::config::{HeadKind, InputFeatures, TrainConfig};
use crate::error::{Error, Result};
use crate::numkit::rng::streams;
use crate::numkit::{gemm_into, rand_uniform, softplus, Matrix, Op, Rng};

/// LayerNorm floor on the per-row standard deviation.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Linear → ReLU → Dropout → LayerNorm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpLayer {
    /// `fan_in x fan_out`; rows are multiplied from the left by the input.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub dropout: f64,
}

impl MlpLayer {
    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn width(&self) -> usize {
        self.weight.cols()
    }
}

/// A gradient-trained `d -> m` output layer, used where the closed-form head is ablated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// `d x m`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearHead {
    pub fn new(width: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (width as f64).sqrt();
        Self {
            weight: rand_uniform(rng, width, outputs, -bound, bound),
            bias: rand_uniform(rng, 1, outputs, -bound, bound).into_vec(),
        }
    }

    pub fn apply(&self, reprs: &Matrix) -> Matrix {
        let mut out = reprs.matmul(&self.weight);
        out.add_row_vector(&self.bias);
        out
    }
}

/// Meta parameters of the time-index network.
///
/// The per-window output layer is not part of the model; it is refit in closed
/// form for every lookback window unless a [`LinearHead`] is attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InrModel {
    pub cff: Option<CffLayer>,
    pub input_dim: usize,
    pub layers: Vec<MlpLayer>,
    /// Regularizer before the softplus transform.
    pub lambda_raw: f64,
    pub head: Option<LinearHead>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Matrix,
    pub pre_activation: Matrix,
    /// Inverted-dropout multipliers (0 or `1/(1-p)`), absent when dropout was off.
    pub mask: Option<Matrix>,
    pub normalized: Matrix,
    pub inv_denom: Vec<f64>,
    /// Rows whose standard deviation fell below the floor.
    pub floored: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub tau: Matrix,
    pub layers: Vec<LayerCache>,
    /// Number of stacked copies of the time-index after the first layer.
    pub copies: usize,
}

impl ForwardCache {
    pub fn masks(&self) -> Vec<Option<Matrix>> {
        self.layers.iter().map(|l| l.mask.clone()).collect()
    }

    /// Features fed to the first trunk layer.
    pub fn features(&self) -> &Matrix {
        &self.layers[0].input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
}

/// Gradients for every trainable tensor, laid out like [`InrModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub layers: Vec<LayerGrads>,
    pub lambda_raw: f64,
    pub head: Option<LinearHead>,
}

impl GradientSet {
    pub fn zeros_like(model: &InrModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weight: Matrix::zeros(l.fan_in(), l.width()),
                    bias: vec![0.0; l.width()],
                    ln_gain: vec![0.0; l.width()],
                    ln_bias: vec![0.0; l.width()],
                })
                .collect(),
            lambda_raw: 0.0,
            head: model.head.as_ref().map(|h| LinearHead {
                weight: Matrix::zeros(h.weight.rows(), h.weight.cols()),
                bias: vec![0.0; h.bias.len()],
            }),
        }
    }

    /// Trunk and head tensors in canonical order; excludes `lambda_raw`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.extend([l.weight.as_slice(), &l.bias, &l.ln_gain, &l.ln_bias]);
        }
        if let Some(h) = &self.head {
            out.extend([h.weight.as_slice(), &h.bias]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(&mut l.bias);
            out.push(&mut l.ln_gain);
            out.push(&mut l.ln_bias);
        }
        if let Some(h) = &mut self.head {
            out.push(h.weight.as_mut_slice());
            out.push(&mut h.bias);
        }
        out
    }

    /// Global L2 norm over every tensor including `lambda_raw`.
    pub fn global_norm(&self) -> f64 {
        let sq: f64 = self
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum();
        (sq + self.lambda_raw * self.lambda_raw).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
        self.lambda_raw *= s;
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        let other_tensors = other.tensors();
        for (a, b) in self.tensors_mut().into_iter().zip(other_tensors) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.lambda_raw += other.lambda_raw;
    }

    pub fn is_finite(&self) -> bool {
        self.lambda_raw.is_finite() && self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

impl InrModel {
    pub fn trunk_input_dim(&self) -> usize {
        self.cff.as_ref().map_or(self.input_dim, |c| c.output_dim())
    }

    pub fn width(&self) -> usize {
        self.layers.last().map_or(self.trunk_input_dim(), |l| l.width())
    }

    /// The regularizer actually used by the ridge head.
    pub fn lambda(&self) -> f64 {
        softplus(self.lambda_raw)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.extend([l.weight.as_slice(), &l.bias, &l.ln_gain, &l.ln_bias]);
        }
        if let Some(h) = &self.head {
            out.extend([h.weight.as_slice(), &h.bias]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(&mut l.bias);
            out.push(&mut l.ln_gain);
            out.push(&mut l.ln_bias);
        }
        if let Some(h) = &mut self.head {
            out.push(h.weight.as_mut_slice());
            out.push(&mut h.bias);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum::<usize>() + 1
    }

    /// Input features for the trunk: Fourier features, or the time-index itself.
    pub fn features(&self, tau: &Matrix) -> Result<Matrix> {
        match &self.cff {
            Some(cff) => cff.forward(tau),
            None => {
                if tau.cols() != self.input_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "time-index has {} columns, model expects {}",
                        tau.cols(),
                        self.input_dim
                    )));
                }
                Ok(tau.clone())
            }
        }
    }
}

/// Source of dropout masks for a forward pass.
pub enum Dropout<'a> {
    Off,
    Sample(&'a mut Rng),
    /// Replays recorded masks; `None` entries disable dropout for that layer.
    Fixed(&'a [Option<Matrix>]),
}

/// Runs the trunk on precomputed input features.
pub fn trunk_forward(model: &InrModel, features: Matrix, tau: &Matrix, dropout: Dropout<'_>) -> Result<(Matrix, ForwardCache)> {
    trunk_forward_tiled(model, features, tau, 1, dropout)
}

/// Runs the trunk for `copies` windows that share one time-index.
///
/// The first linear map is evaluated once and its output stacked `copies`
/// times row-wise, so every copy draws its own dropout masks. Representations
/// come back as `copies` blocks of `tau.rows()` rows.
pub fn trunk_forward_tiled(
    model: &InrModel,
    features: Matrix,
    tau: &Matrix,
    copies: usize,
    mut dropout: Dropout<'_>,
) -> Result<(Matrix, ForwardCache)> {
    if copies == 0 {
        return Err(Error::ShapeMismatch("trunk needs at least one copy".into()));
    }
    if features.cols() != model.trunk_input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "trunk expects {} input features, got {}",
            model.trunk_input_dim(),
            features.cols()
        )));
    }
    let mut caches = Vec::with_capacity(model.layers.len());
    let mut z = features;
    for (k, layer) in model.layers.iter().enumerate() {
        let width = layer.width();
        let mut pre = Matrix::zeros(z.rows(), width);
        gemm_into(Op::N, &z, Op::N, &layer.weight, 0.0, &mut pre, 1.0);
        pre.add_row_vector(&layer.bias);
        if k == 0 && copies > 1 {
            pre = Matrix::vstack(&vec![&pre; copies])?;
        }
        let n = pre.rows();

        let mut act = pre.map(|x| x.max(0.0));
        let mask = match &mut dropout {
            Dropout::Off => None,
            Dropout::Sample(rng) => {
                if layer.dropout > 0.0 {
                    let keep = 1.0 - layer.dropout;
                    let scale = 1.0 / keep;
                    let data = (0..n * width)
                        .map(|_| if rng.next_f64() < keep { scale } else { 0.0 })
                        .collect();
                    Some(Matrix::from_vec(n, width, data)?)
                } else {
                    None
                }
            }
            Dropout::Fixed(masks) => masks.get(k).cloned().flatten(),
        };
        if let Some(m) = &mask {
            if m.shape() != act.shape() {
                return Err(Error::ShapeMismatch(format!("dropout mask for layer {k}")));
            }
            act.as_mut_slice()
                .iter_mut()
                .zip(m.as_slice())
                .for_each(|(a, s)| *a *= s);
        }

        let mut normalized = act;
        let mut inv_denom = Vec::with_capacity(n);
        let mut floored = Vec::with_capacity(n);
        let mut out = Matrix::zeros(n, width);
        for i in 0..n {
            let row = normalized.row_mut(i);
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / width as f64;
            let std = var.sqrt();
            let is_floored = std <= LAYER_NORM_EPS;
            let inv = 1.0 / if is_floored { LAYER_NORM_EPS } else { std };
            row.iter_mut().for_each(|x| *x = (*x - mean) * inv);
            let dst = out.row_mut(i);
            for j in 0..width {
                dst[j] = row[j] * layer.ln_gain[j] + layer.ln_bias[j];
            }
            inv_denom.push(inv);
            floored.push(is_floored);
        }
        caches.push(LayerCache {
            input: z,
            pre_activation: pre,
            mask,
            normalized,
            inv_denom,
            floored,
        });
        z = out;
    }
    Ok((
        z,
        ForwardCache {
            tau: tau.clone(),
            layers: caches,
            copies,
        },
    ))
}

/// Maps time-index rows to representations `g_φ(τ)`.
pub fn inr_forward(model: &InrModel, tau: &Matrix, mode: Mode, rng: &mut Rng) -> Result<(Matrix, ForwardCache)> {
    tau.ensure_finite("time-index")?;
    let features = model.features(tau)?;
    let dropout = match mode {
        Mode::Train => Dropout::Sample(rng),
        Mode::Eval => Dropout::Off,
    };
    trunk_forward(model, features, tau, dropout)
}

/// Forward pass replaying the given dropout masks.
pub fn inr_forward_with_masks(model: &InrModel, tau: &Matrix, masks: &[Option<Matrix>]) -> Result<(Matrix, ForwardCache)> {
    let features = model.features(tau)?;
    trunk_forward(model, features, tau, Dropout::Fixed(masks))
}

fn backward_impl(
    model: &InrModel,
    cache: &ForwardCache,
    d_reprs: &Matrix,
    want_input_grad: bool,
) -> Result<(GradientSet, Option<Matrix>)> {
    if cache.layers.len() != model.layers.len() {
        return Err(Error::ShapeMismatch("cache does not match model depth".into()));
    }
    let n = cache.tau.rows() * cache.copies;
    if d_reprs.shape() != (n, model.width()) {
        return Err(Error::ShapeMismatch(format!(
            "representation cotangent {:?}, expected {:?}",
            d_reprs.shape(),
            (n, model.width())
        )));
    }
    let mut grads = GradientSet::zeros_like(model);
    let mut dz = d_reprs.clone();
    for k in (0..model.layers.len()).rev() {
        let layer = &model.layers[k];
        let lc = &cache.layers[k];
        let g = &mut grads.layers[k];
        let width = layer.width();

        // LayerNorm
        let mut du = Matrix::zeros(n, width);
        for i in 0..n {
            let dout = dz.row(i);
            let xhat = lc.normalized.row(i);
            let mut dxhat = vec![0.0; width];
            for j in 0..width {
                g.ln_gain[j] += dout[j] * xhat[j];
                g.ln_bias[j] += dout[j];
                dxhat[j] = dout[j] * layer.ln_gain[j];
            }
            let mean_dx = dxhat.iter().sum::<f64>() / width as f64;
            let inv = lc.inv_denom[i];
            let dst = du.row_mut(i);
            if lc.floored[i] {
                for j in 0..width {
                    dst[j] = inv * (dxhat[j] - mean_dx);
                }
            } else {
                let mean_dx_xhat = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / width as f64;
                for j in 0..width {
                    dst[j] = inv * (dxhat[j] - mean_dx - xhat[j] * mean_dx_xhat);
                }
            }
        }

        // Dropout and ReLU
        let mut da = du;
        if let Some(m) = &lc.mask {
            da.as_mut_slice()
                .iter_mut()
                .zip(m.as_slice())
                .for_each(|(a, s)| *a *= s);
        }
        da.as_mut_slice()
            .iter_mut()
            .zip(lc.pre_activation.as_slice())
            .for_each(|(a, &p)| {
                if p <= 0.0 {
                    *a = 0.0
                }
            });

        // Linear; the first layer's output was tiled, so its cotangent folds back.
        if k == 0 && cache.copies > 1 {
            let rows = cache.tau.rows();
            let mut folded = da.slice_rows(0, rows);
            for c in 1..cache.copies {
                folded.add_assign(&da.slice_rows(c * rows, (c + 1) * rows));
            }
            da = folded;
        }
        gemm_into(Op::T, &lc.input, Op::N, &da, 0.0, &mut g.weight, 1.0);
        g.bias = da.sum_rows();
        if k > 0 || want_input_grad {
            dz = Matrix::gemm(Op::N, &da, Op::T, &layer.weight);
        }
    }
    let dtau = if want_input_grad {
        Some(match &model.cff {
            Some(cff) => cff.backward_input(&cache.tau, &dz),
            None => dz,
        })
    } else {
        None
    };
    Ok((grads, dtau))
}

/// Gradients of a scalar loss for every trunk parameter plus the time-index.
///
/// Fourier projections are frozen and get no gradient. `lambda_raw` is left at
/// zero; it only receives gradient through the ridge head.
pub fn inr_backward(model: &InrModel, cache: &ForwardCache, d_reprs: &Matrix) -> Result<(GradientSet, Matrix)> {
    let (g, dtau) = backward_impl(model, cache, d_reprs, true)?;
    Ok((g, dtau.expect("requested")))
}

/// Like [`inr_backward`] without the time-index gradient.
pub fn inr_backward_params(model: &InrModel, cache: &ForwardCache, d_reprs: &Matrix) -> Result<GradientSet> {
    Ok(backward_impl(model, cache, d_reprs, false)?.0)
}

/// [`init_model`] plus a trained linear head over `channels` outputs when the
/// configuration asks for one.
pub fn init_forecaster(hp: &TrainConfig, input_dim: usize, channels: usize, rng: &Rng) -> Result<InrModel> {
    let mut model = init_model(hp, input_dim, rng)?;
    if hp.head == HeadKind::Linear {
        if channels == 0 {
            return Err(Error::InvalidConfig("a linear head needs at least one output channel".into()));
        }
        model.head = Some(LinearHead::new(hp.layer_size, channels, &mut rng.fork(streams::HEAD)));
    }
    Ok(model)
}

/// Builds a model from the configuration; draws use forks of `rng` only.
pub fn init_model(hp: &TrainConfig, input_dim: usize, rng: &Rng) -> Result<InrModel> {
    hp.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidConfig("time-index dimension must be >= 1".into()));
    }
    let cff = match hp.input_features {
        InputFeatures::Fourier => Some(CffLayer::new(&hp.scales, hp.ff_size, input_dim, &mut rng.fork(streams::CFF))?),
        InputFeatures::Linear => None,
    };
    let mut layer_rng = rng.fork(streams::LAYERS);
    let mut fan_in = cff.as_ref().map_or(input_dim, |c| c.output_dim());
    let mut layers = Vec::with_capacity(hp.layers);
    for _ in 0..hp.layers {
        let bound = 1.0 / (fan_in as f64).sqrt();
        layers.push(MlpLayer {
            weight: rand_uniform(&mut layer_rng, fan_in, hp.layer_size, -bound, bound),
            bias: rand_uniform(&mut layer_rng, 1, hp.layer_size, -bound, bound).into_vec(),
            ln_gain: vec![1.0; hp.layer_size],
            ln_bias: vec![0.0; hp.layer_size],
            dropout: hp.dropout,
        });
        fan_in = hp.layer_size;
    }
    Ok(InrModel {
        cff,
        input_dim,
        layers,
        lambda_raw: hp.lambda_init,
        head: None,
    })
}
