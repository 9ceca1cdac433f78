use deeptime::data::{SplitSpec, TimeSeries};
use deeptime::eval::{evaluate, sweep_mu, EvalOptions, PreparedSeries, SweepOptions};
use deeptime::numkit::Matrix;
use deeptime::TrainConfig;

fn series(n: usize) -> TimeSeries {
    let mut v = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = i as f64;
        v.push((t * 0.21).sin() * 2.0 + 5.0);
        v.push((t * 0.07).cos() - 0.01 * t);
    }
    TimeSeries::new("two", Matrix::from_vec(n, 2, v).unwrap())
}

fn cfg() -> TrainConfig {
    TrainConfig {
        layers: 2,
        layer_size: 16,
        ff_size: 32,
        horizon: 6,
        epochs: 4,
        warmup_epochs: 1,
        batch_size: 16,
        ..Default::default()
    }
}

#[test]
fn standardizer_ignores_validation_and_test_rows() {
    let ts = series(400);
    let split = SplitSpec::default();
    let a = PreparedSeries::new(&ts, &split, false).unwrap();
    let (n_train, _, _) = split.sizes(ts.len());
    let mut mutated = ts.clone();
    for i in n_train..ts.len() {
        mutated.values[(i, 0)] = 1e3 * i as f64;
        mutated.values[(i, 1)] = -7.0;
    }
    let b = PreparedSeries::new(&mutated, &split, false).unwrap();
    assert_eq!(a.standardizer, b.standardizer);
    assert_eq!(a.train.values, b.train.values);
}

#[test]
fn sweep_selects_on_validation_and_reads_test_once() {
    let data = PreparedSeries::new(&series(600), &SplitSpec::default(), false).unwrap();
    let opts = SweepOptions {
        mus: vec![1, 2, 3],
        ..Default::default()
    };
    let (result, _) = sweep_mu(&cfg(), &data, &opts).unwrap();
    assert_eq!(result.test_accesses, 1);
    assert_eq!(data.test_accesses(), 1);
    let best = result
        .rows
        .iter()
        .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
        .unwrap();
    assert_eq!(result.chosen_mu, best.mu);
    for r in &result.rows {
        assert_eq!(r.test.is_some(), r.mu == result.chosen_mu);
    }
}

#[test]
fn evaluation_is_deterministic() {
    let data = PreparedSeries::new(&series(500), &SplitSpec::default(), false).unwrap();
    let (model, _) = deeptime::eval::fit_series(&cfg(), &data).unwrap();
    let opts = EvalOptions {
        keep_per_window: true,
        ..Default::default()
    };
    let test = data.test();
    let a = evaluate(&model, test, None, 6, 6, &opts).unwrap();
    let b = evaluate(&model, test, None, 6, 6, &opts).unwrap();
    assert_eq!(a, b);
    let raw = evaluate(
        &model,
        test,
        None,
        6,
        6,
        &EvalOptions {
            raw_scale: true,
            ..opts
        },
    )
    .unwrap();
    assert_ne!(raw.mse, a.mse);
}
