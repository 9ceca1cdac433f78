//! The deep time-index network: Fourier features feeding a ReLU MLP trunk.

pub mod cff;
pub mod model;

pub use cff::CffLayer;
pub use model::{
    init_forecaster, init_model, inr_backward, inr_backward_params, inr_forward, inr_forward_with_masks, trunk_forward,
    trunk_forward_tiled, Dropout,
    ForwardCache, GradientSet, InrModel, LayerCache, LayerGrads, LinearHead, MlpLayer, Mode, LAYER_NORM_EPS,
};

use crate::numkit::Matrix;

/// `L + H` evenly spaced points on `[0, 1]` as a column.
pub fn make_time_index(lookback: usize, horizon: usize) -> Matrix {
    let n = lookback + horizon;
    assert!(lookback >= 1 && horizon >= 1, "lookback and horizon must be >= 1");
    let denom = (n - 1) as f64;
    Matrix::from_vec(n, 1, (0..n).map(|i| i as f64 / denom).collect()).expect("length matches")
}
