//! Window forecasts and their gradients.
//!
//! Windows with identical `(L, H)` and no extra time features share one
//! time-index. Without dropout they need a single trunk pass, and their
//! lookbacks are stacked column-wise into one multi-output ridge problem;
//! because ridge regression decouples across output columns this equals
//! solving every window separately. With dropout each window gets its own
//! masks: the first layer still runs once and is tiled across windows.

use crate::config::MaskSharing;
use crate::error::{Error, Result};
use crate::inr::{
    inr_backward_params, make_time_index, trunk_forward, trunk_forward_tiled, Dropout, ForwardCache, GradientSet, InrModel,
    LinearHead, Mode,
};
use crate::numkit::{softplus_grad, Matrix, Op, RidgeBranch, RidgeFit, Rng};

use super::task::Task;

/// Windows per stacked ridge solve during evaluation.
const EVAL_CHUNK: usize = 512;

/// Upper bound on entries of one tiled activation matrix (about 32 MB).
const TILE_BUDGET: usize = 1 << 22;

/// Mean squared error over every entry.
pub fn loss_mse(preds: &Matrix, target: &Matrix) -> Result<f64> {
    if preds.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs targets {:?}",
            preds.shape(),
            target.shape()
        )));
    }
    let n = preds.as_slice().len().max(1) as f64;
    Ok(preds
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// `∂ mse / ∂ preds = 2 (preds - target) / N`.
pub fn loss_mse_grad(preds: &Matrix, target: &Matrix) -> Result<Matrix> {
    if preds.shape() != target.shape() {
        return Err(Error::ShapeMismatch("mse gradient: shapes differ".into()));
    }
    let n = preds.as_slice().len().max(1) as f64;
    let mut g = preds.sub(target);
    g.scale_inplace(2.0 / n);
    Ok(g)
}

/// Precomputed trunk inputs for a fixed `(L, H)` time-index.
#[derive(Debug, Clone)]
pub struct SharedIndex {
    pub lookback: usize,
    pub horizon: usize,
    pub tau: Matrix,
    pub features: Matrix,
}

impl SharedIndex {
    pub fn new(model: &InrModel, lookback: usize, horizon: usize) -> Result<Self> {
        let tau = make_time_index(lookback, horizon);
        let features = model.features(&tau)?;
        Ok(Self {
            lookback,
            horizon,
            tau,
            features,
        })
    }

    fn matches(&self, task: &Task) -> bool {
        !task.has_extra_features && task.lookback_len() == self.lookback && task.horizon_len() == self.horizon
    }
}

#[derive(Debug, Clone)]
enum HeadCache {
    Ridge { fit: RidgeFit, horizon_reprs: Matrix },
    Linear { horizon_reprs: Matrix, copies: usize },
}

/// Everything the backward pass of a forecast needs.
#[derive(Debug, Clone)]
pub struct ForecastCache {
    inr: ForwardCache,
    lookback_len: usize,
    head: HeadCache,
}

impl ForecastCache {
    pub fn inr(&self) -> &ForwardCache {
        &self.inr
    }

    /// Whether the ridge head took the dual branch.
    pub fn used_woodbury(&self) -> Option<bool> {
        match &self.head {
            HeadCache::Ridge { fit, .. } => Some(fit.used_woodbury()),
            HeadCache::Linear { .. } => None,
        }
    }
}

fn head_forward(
    model: &InrModel,
    reprs: &Matrix,
    lookback_len: usize,
    targets: &Matrix,
    copies: usize,
    branch: RidgeBranch,
) -> Result<(Matrix, HeadCache)> {
    let lookback_reprs = reprs.slice_rows(0, lookback_len);
    let horizon_reprs = reprs.slice_rows(lookback_len, reprs.rows());
    match &model.head {
        None => {
            let fit = RidgeFit::new(&lookback_reprs, targets, model.lambda(), true, branch)?;
            let preds = fit.predict(&horizon_reprs);
            Ok((preds, HeadCache::Ridge { fit, horizon_reprs }))
        }
        Some(head) => {
            let single = head.apply(&horizon_reprs);
            let preds = if copies == 1 {
                single
            } else {
                Matrix::hstack(&vec![&single; copies])?
            };
            Ok((preds, HeadCache::Linear { horizon_reprs, copies }))
        }
    }
}

/// Forecasts for lookbacks sharing one time-index; predictions are stacked like the lookbacks.
fn forecast_stacked(
    model: &InrModel,
    tau: &Matrix,
    features: Matrix,
    lookbacks: &Matrix,
    copies: usize,
    dropout: Dropout<'_>,
    branch: RidgeBranch,
) -> Result<(Matrix, ForecastCache)> {
    let lookback_len = lookbacks.rows();
    if lookback_len >= tau.rows() {
        return Err(Error::ShapeMismatch("time-index leaves no horizon rows".into()));
    }
    let (reprs, inr_cache) = trunk_forward(model, features, tau, dropout)?;
    let (preds, head) = head_forward(model, &reprs, lookback_len, lookbacks, copies, branch)?;
    preds.ensure_finite("forecast")?;
    Ok((
        preds,
        ForecastCache {
            inr: inr_cache,
            lookback_len,
            head,
        },
    ))
}

struct HeadGrads {
    d_reprs: Matrix,
    lambda_raw: f64,
    head: Option<LinearHead>,
}

/// Backward through the output layer into the `total x width` representations.
fn head_backward(model: &InrModel, head: &HeadCache, lookback_len: usize, total: usize, d_preds: &Matrix) -> Result<HeadGrads> {
    let width = model.width();
    let mut d_reprs = Matrix::zeros(total, width);
    match head {
        HeadCache::Ridge { fit, horizon_reprs } => {
            let w = fit.weights();
            if d_preds.shape() != (horizon_reprs.rows(), w.cols()) {
                return Err(Error::ShapeMismatch("forecast cotangent shape".into()));
            }
            // preds = Z_h W[..d] + W[d]
            let mut dw = Matrix::zeros(width + 1, w.cols());
            let dw_top = Matrix::gemm(Op::T, horizon_reprs, Op::N, d_preds);
            dw.set_block(0, 0, &dw_top);
            dw.row_mut(width).copy_from_slice(&d_preds.sum_rows());
            let w_top = w.slice_rows(0, width);
            let dz_h = Matrix::gemm(Op::N, d_preds, Op::T, &w_top);
            let rg = fit.backward(&dw)?;
            d_reprs.set_block(0, 0, &rg.dz);
            d_reprs.set_block(lookback_len, 0, &dz_h);
            Ok(HeadGrads {
                d_reprs,
                lambda_raw: rg.dlam * softplus_grad(model.lambda_raw),
                head: None,
            })
        }
        HeadCache::Linear { horizon_reprs, copies } => {
            let head = model.head.as_ref().expect("linear cache implies a head");
            let m = head.weight.cols();
            if d_preds.shape() != (horizon_reprs.rows(), m * copies) {
                return Err(Error::ShapeMismatch("forecast cotangent shape".into()));
            }
            let mut d_single = Matrix::zeros(horizon_reprs.rows(), m);
            for c in 0..*copies {
                d_single.add_assign(&d_preds.slice_cols(c * m, (c + 1) * m));
            }
            let dw = Matrix::gemm(Op::T, horizon_reprs, Op::N, &d_single);
            let db = d_single.sum_rows();
            let dz_h = Matrix::gemm(Op::N, &d_single, Op::T, &head.weight);
            d_reprs.set_block(lookback_len, 0, &dz_h);
            Ok(HeadGrads {
                d_reprs,
                lambda_raw: 0.0,
                head: Some(LinearHead { weight: dw, bias: db }),
            })
        }
    }
}

/// Gradient of a scalar loss with respect to every meta parameter given `∂L/∂preds`.
pub fn forecast_backward(model: &InrModel, cache: &ForecastCache, d_preds: &Matrix) -> Result<GradientSet> {
    let hg = head_backward(model, &cache.head, cache.lookback_len, cache.inr.tau.rows(), d_preds)?;
    let mut grads = inr_backward_params(model, &cache.inr, &hg.d_reprs)?;
    grads.lambda_raw = hg.lambda_raw;
    grads.head = hg.head;
    Ok(grads)
}

fn dropout_for(mode: Mode, rng: &mut Rng) -> Dropout<'_> {
    match mode {
        Mode::Train => Dropout::Sample(rng),
        Mode::Eval => Dropout::Off,
    }
}

/// Forecasts `horizon` steps after `lookback` with the relative time-index only.
pub fn forecast(model: &InrModel, lookback: &Matrix, horizon: usize, mode: Mode, rng: &mut Rng) -> Result<(Matrix, ForecastCache)> {
    if lookback.rows() == 0 || horizon == 0 {
        return Err(Error::ShapeMismatch("lookback and horizon must be non-empty".into()));
    }
    lookback.ensure_finite("lookback")?;
    let tau = make_time_index(lookback.rows(), horizon);
    let features = model.features(&tau)?;
    forecast_stacked(model, &tau, features, lookback, 1, dropout_for(mode, rng), RidgeBranch::Auto)
}

/// [`forecast`] with an explicit ridge branch.
pub fn forecast_with_branch(
    model: &InrModel,
    lookback: &Matrix,
    horizon: usize,
    masks: &[Option<Matrix>],
    branch: RidgeBranch,
) -> Result<(Matrix, ForecastCache)> {
    let tau = make_time_index(lookback.rows(), horizon);
    let features = model.features(&tau)?;
    forecast_stacked(model, &tau, features, lookback, 1, Dropout::Fixed(masks), branch)
}

/// Forecast for one task, honouring any extra time features it carries.
pub fn forecast_task(model: &InrModel, task: &Task, mode: Mode, rng: &mut Rng) -> Result<(Matrix, ForecastCache)> {
    let features = model.features(&task.tau)?;
    forecast_stacked(
        model,
        &task.tau,
        features,
        &task.lookback,
        1,
        dropout_for(mode, rng),
        RidgeBranch::Auto,
    )
}

fn stack_columns(mats: &[&Matrix]) -> Result<Matrix> {
    Matrix::hstack(mats)
}

fn split_columns(stacked: &Matrix, width: usize) -> Vec<Matrix> {
    (0..stacked.cols() / width)
        .map(|i| stacked.slice_cols(i * width, (i + 1) * width))
        .collect()
}

/// Eval-mode forecasts for every task, in task order.
pub fn forecast_many(model: &InrModel, tasks: &[Task]) -> Result<Vec<Matrix>> {
    forecast_many_shared(model, tasks, None)
}

/// [`forecast_many`] reusing precomputed trunk inputs where they apply.
pub fn forecast_many_shared(model: &InrModel, tasks: &[Task], shared: Option<&SharedIndex>) -> Result<Vec<Matrix>> {
    let mut out: Vec<Option<Matrix>> = vec![None; tasks.len()];
    // Group by (L, H, m) for tasks without extra features.
    let mut groups: Vec<((usize, usize, usize), Vec<usize>)> = Vec::new();
    for (i, t) in tasks.iter().enumerate() {
        if t.has_extra_features {
            let (p, _) = forecast_task(model, t, Mode::Eval, &mut Rng::new(0))?;
            out[i] = Some(p);
            continue;
        }
        let key = (t.lookback_len(), t.horizon_len(), t.channels());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    for ((l, h, m), idx) in groups {
        let own;
        let index = match shared {
            Some(s) if s.lookback == l && s.horizon == h => s,
            _ => {
                own = SharedIndex::new(model, l, h)?;
                &own
            }
        };
        let (reprs, _) = trunk_forward(model, index.features.clone(), &index.tau, Dropout::Off)?;
        for chunk in idx.chunks(EVAL_CHUNK) {
            let lookbacks: Vec<&Matrix> = chunk.iter().map(|&i| &tasks[i].lookback).collect();
            let stacked = stack_columns(&lookbacks)?;
            let (preds, _) = head_forward(model, &reprs, l, &stacked, chunk.len(), RidgeBranch::Auto)?;
            preds.ensure_finite("forecast")?;
            for (&i, p) in chunk.iter().zip(split_columns(&preds, m)) {
                out[i] = Some(p);
            }
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every task forecast")).collect())
}

/// Loss and gradient for windows sharing `s`, each with its own dropout masks.
/// Every window's MSE is weighted by `weight`.
fn tiled_loss_grad(model: &InrModel, s: &SharedIndex, tasks: &[&Task], weight: f64, rng: &mut Rng) -> Result<(f64, GradientSet)> {
    let n = s.tau.rows();
    let (reprs, cache) = trunk_forward_tiled(model, s.features.clone(), &s.tau, tasks.len(), Dropout::Sample(rng))?;
    let mut d_reprs = Matrix::zeros(reprs.rows(), model.width());
    let mut loss = 0.0;
    let mut lambda_raw = 0.0;
    let mut head: Option<LinearHead> = None;
    for (i, task) in tasks.iter().enumerate() {
        let block = reprs.slice_rows(i * n, (i + 1) * n);
        let (preds, hc) = head_forward(model, &block, s.lookback, &task.lookback, 1, RidgeBranch::Auto)?;
        preds.ensure_finite("forecast")?;
        loss += loss_mse(&preds, &task.horizon)? * weight;
        let mut d = loss_mse_grad(&preds, &task.horizon)?;
        d.scale_inplace(weight);
        let hg = head_backward(model, &hc, s.lookback, n, &d)?;
        d_reprs.set_block(i * n, 0, &hg.d_reprs);
        lambda_raw += hg.lambda_raw;
        if let Some(g) = hg.head {
            match &mut head {
                Some(acc) => {
                    acc.weight.add_assign(&g.weight);
                    acc.bias.iter_mut().zip(&g.bias).for_each(|(a, b)| *a += b);
                }
                None => head = Some(g),
            }
        }
    }
    let mut grads = inr_backward_params(model, &cache, &d_reprs)?;
    grads.lambda_raw = lambda_raw;
    grads.head = head;
    Ok((loss, grads))
}

/// Mean horizon MSE over a batch of tasks and its gradient.
///
/// Tasks that share `shared`'s time-index run through a common trunk pass;
/// the rest are forecast one at a time.
pub fn batch_loss_grad(
    model: &InrModel,
    tasks: &[&Task],
    shared: Option<&SharedIndex>,
    sharing: MaskSharing,
    rng: &mut Rng,
) -> Result<(f64, GradientSet)> {
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let b = tasks.len() as f64;
    let mut grads = GradientSet::zeros_like(model);
    let mut loss = 0.0;

    let (stacked, single): (Vec<&Task>, Vec<&Task>) = match shared {
        Some(s) => tasks.iter().partition(|t| s.matches(t)),
        None => (Vec::new(), tasks.to_vec()),
    };

    let has_dropout = model.layers.iter().any(|l| l.dropout > 0.0);
    if let Some(s) = shared.filter(|_| !stacked.is_empty() && has_dropout && sharing == MaskSharing::PerWindow) {
        let per_chunk = (TILE_BUDGET / (s.tau.rows() * model.width()).max(1)).max(1);
        for chunk in stacked.chunks(per_chunk) {
            let (l, g) = tiled_loss_grad(model, s, chunk, 1.0 / b, rng)?;
            loss += l;
            grads.add_assign(&g);
        }
    } else if let Some(s) = shared.filter(|_| !stacked.is_empty()) {
        let m = stacked[0].channels();
        if stacked.iter().any(|t| t.channels() != m) {
            return Err(Error::ShapeMismatch("tasks in a batch must share a channel count".into()));
        }
        let lookbacks: Vec<&Matrix> = stacked.iter().map(|t| &t.lookback).collect();
        let horizons: Vec<&Matrix> = stacked.iter().map(|t| &t.horizon).collect();
        let y = stack_columns(&lookbacks)?;
        let target = stack_columns(&horizons)?;
        let (preds, cache) = forecast_stacked(
            model,
            &s.tau,
            s.features.clone(),
            &y,
            stacked.len(),
            Dropout::Sample(rng),
            RidgeBranch::Auto,
        )?;
        // Mean over the stacked entries equals the mean of per-task means; rescale to the batch.
        let share = stacked.len() as f64 / b;
        loss += loss_mse(&preds, &target)? * share;
        let mut d = loss_mse_grad(&preds, &target)?;
        d.scale_inplace(share);
        grads.add_assign(&forecast_backward(model, &cache, &d)?);
    }
    for task in single {
        let (preds, cache) = forecast_task(model, task, Mode::Train, rng)?;
        loss += loss_mse(&preds, &task.horizon)? / b;
        let mut d = loss_mse_grad(&preds, &task.horizon)?;
        d.scale_inplace(1.0 / b);
        grads.add_assign(&forecast_backward(model, &cache, &d)?);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss".into()));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;
    use crate::inr::init_model;

    fn model() -> InrModel {
        let cfg = TrainConfig {
            layers: 2,
            layer_size: 8,
            ff_size: 16,
            dropout: 0.0,
            ..Default::default()
        };
        init_model(&cfg, 1, &Rng::new(1)).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = Matrix::from_rows(&[&[1.0, 2.0]]);
        assert_eq!(loss_mse(&a, &a).unwrap(), 0.0);
        let b = Matrix::from_rows(&[&[2.0, 3.0]]);
        assert_eq!(loss_mse(&a, &b).unwrap(), 1.0);
        let z = Matrix::from_rows(&[&[0.0, 0.0]]);
        let t = Matrix::from_rows(&[&[3.0, 4.0]]);
        assert_eq!(loss_mse(&z, &t).unwrap(), 12.5);
        let g = loss_mse_grad(&z, &t).unwrap();
        assert_eq!(g.as_slice(), &[-3.0, -4.0]);
        assert!(loss_mse(&a, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn forecast_shapes() {
        let m = model();
        for (l, h, c) in [(1, 1, 1), (5, 3, 2), (12, 4, 3)] {
            let lb = Matrix::filled(l, c, 0.5);
            let (p, _) = forecast(&m, &lb, h, Mode::Eval, &mut Rng::new(0)).unwrap();
            assert_eq!(p.shape(), (h, c));
        }
    }

    #[test]
    fn eval_forecast_is_deterministic() {
        let m = model();
        let lb = Matrix::from_vec(6, 1, vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0]).unwrap();
        let a = forecast(&m, &lb, 3, Mode::Eval, &mut Rng::new(0)).unwrap().0;
        let b = forecast(&m, &lb, 3, Mode::Eval, &mut Rng::new(9)).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_trunk_predicts_regularized_mean() {
        let mut m = model();
        for l in &mut m.layers {
            l.weight = Matrix::zeros(l.fan_in(), l.width());
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let lb = Matrix::from_rows(&[&[1.0, 10.0], &[2.0, 20.0], &[4.0, 40.0]]);
        let (p, _) = forecast(&m, &lb, 2, Mode::Eval, &mut Rng::new(0)).unwrap();
        let lam = std::f64::consts::LN_2;
        for i in 0..2 {
            assert!((p[(i, 0)] - 7.0 / (3.0 + lam)).abs() < 1e-12);
            assert!((p[(i, 1)] - 70.0 / (3.0 + lam)).abs() < 1e-12);
        }
    }

    #[test]
    fn stacked_forecasts_match_individual() {
        let m = model();
        let mut rng = Rng::new(4);
        let tasks: Vec<Task> = (0..5)
            .map(|i| {
                let lb = crate::numkit::randn(&mut rng, 7, 2, 1.0);
                let hz = crate::numkit::randn(&mut rng, 3, 2, 1.0);
                Task::new(lb, hz, i).unwrap()
            })
            .collect();
        let many = forecast_many(&m, &tasks).unwrap();
        for (t, p) in tasks.iter().zip(&many) {
            let (q, _) = forecast(&m, &t.lookback, 3, Mode::Eval, &mut Rng::new(0)).unwrap();
            assert!(p.max_abs_diff(&q) < 1e-12);
        }
    }
}
