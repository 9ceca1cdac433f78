mod common;

use common::model_fd_error;
use deeptime::config::TrainConfig;
use deeptime::forecaster::{forecast, forecast_backward, forecast_with_branch, loss_mse, loss_mse_grad};
use deeptime::inr::{init_model, InrModel, LinearHead, Mode};
use deeptime::numkit::{randn, Matrix, RidgeBranch, Rng};

fn setup(dropout: f64, seed: u64) -> (InrModel, Matrix, Matrix) {
    let cfg = TrainConfig {
        layers: 2,
        layer_size: 8,
        ff_size: 16,
        scales: vec![0.5, 3.0],
        dropout,
        lambda_init: 0.3,
        ..Default::default()
    };
    let model = init_model(&cfg, 1, &Rng::new(seed)).unwrap();
    let mut rng = Rng::new(seed + 100);
    let lookback = randn(&mut rng, 16, 2, 1.0);
    let target = randn(&mut rng, 8, 2, 1.0);
    (model, lookback, target)
}

fn end_to_end_error(dropout: f64, branch: RidgeBranch) -> (f64, bool) {
    let (model, lookback, target) = setup(dropout, 7);
    let (_, cache) = forecast(&model, &lookback, 8, Mode::Train, &mut Rng::new(3)).unwrap();
    let masks = cache.inr().masks();
    let (preds, cache) = forecast_with_branch(&model, &lookback, 8, &masks, branch).unwrap();
    let woodbury = cache.used_woodbury().unwrap();
    let d = loss_mse_grad(&preds, &target).unwrap();
    let grads = forecast_backward(&model, &cache, &d).unwrap();
    let err = model_fd_error(&model, &grads, 1e-5, |m| {
        let (p, _) = forecast_with_branch(m, &lookback, 8, &masks, branch).unwrap();
        loss_mse(&p, &target).unwrap()
    });
    (err, woodbury)
}

#[test]
fn end_to_end_gradient_standard_branch() {
    let (err, woodbury) = end_to_end_error(0.0, RidgeBranch::Auto);
    assert!(!woodbury, "L=16 >= d'=9 should use the standard form");
    assert!(err <= 1e-4, "err {err:e}");
}

#[test]
fn end_to_end_gradient_woodbury_branch() {
    let (err, woodbury) = end_to_end_error(0.0, RidgeBranch::Woodbury);
    assert!(woodbury);
    assert!(err <= 1e-4, "err {err:e}");
}

#[test]
fn end_to_end_gradient_with_frozen_dropout() {
    for branch in [RidgeBranch::Standard, RidgeBranch::Woodbury] {
        let (err, _) = end_to_end_error(0.3, branch);
        assert!(err <= 1e-4, "{branch:?} err {err:e}");
    }
}

#[test]
fn linear_head_gradient_matches_fd() {
    let (mut model, lookback, target) = setup(0.0, 11);
    model.head = Some(LinearHead::new(8, 2, &mut Rng::new(4)));
    let (preds, cache) = forecast(&model, &lookback, 8, Mode::Eval, &mut Rng::new(0)).unwrap();
    let d = loss_mse_grad(&preds, &target).unwrap();
    let grads = forecast_backward(&model, &cache, &d).unwrap();
    assert_eq!(grads.lambda_raw, 0.0);
    let err = model_fd_error(&model, &grads, 1e-5, |m| {
        let (p, _) = forecast(m, &lookback, 8, Mode::Eval, &mut Rng::new(0)).unwrap();
        loss_mse(&p, &target).unwrap()
    });
    assert!(err <= 1e-4, "err {err:e}");
}
