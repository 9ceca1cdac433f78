//! Acceptance suite. Prints one line per criterion and exits non-zero if any fails.
//!
//! `DEEPTIME_ACCEPTANCE=1,3,7` restricts the run to the listed criteria.
//! Criterion 5 runs only when `DEEPTIME_ETTM2_CSV` points at the ETTm2 file.

mod common;

use std::collections::HashMap;
use std::process::Command;
use std::time::Instant;

use common::model_fd_error;
use deeptime::data::{gen_synthetic, load_csv, Family, SplitSpec, SyntheticData, SyntheticSpec, TargetMode};
use deeptime::eval::protocol::synthetic_train_config;
use deeptime::eval::scales::cff_change;
use deeptime::eval::{
    profile, run_ablation, sweep_mu, AblationOptions, AblationResult, AblationSource, AblationVariant, LocalOptions,
    PreparedSeries, ProfileOptions, SweepOptions,
};
use deeptime::forecaster::{forecast, forecast_backward, forecast_with_branch, loss_mse, loss_mse_grad};
use deeptime::inr::{inr_forward, init_model, make_time_index, Mode};
use deeptime::numkit::{randn, ridge_fit, Matrix, Op, RidgeBranch, RidgeFit, Rng};
use deeptime::TrainConfig;
use serde_json::Value;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn skip(detail: &str) -> Self {
        Self {
            status: Status::Skip,
            detail: detail.into(),
        }
    }
}

/// Synthetic data and full-model results shared between criteria.
#[derive(Default)]
struct Shared {
    data: HashMap<Family, SyntheticData>,
    full: HashMap<Family, AblationResult>,
}

impl Shared {
    fn data(&mut self, family: Family) -> &SyntheticData {
        self.data
            .entry(family)
            .or_insert_with(|| gen_synthetic(&SyntheticSpec::new(family, 0)).expect("synthetic generation"))
    }

    fn full(&mut self, family: Family) -> AblationResult {
        if let Some(r) = self.full.get(&family) {
            return r.clone();
        }
        let cfg = synthetic_train_config();
        let data = self.data(family);
        let (r, _) = run_ablation(AblationVariant::Full, &cfg, &AblationSource::Synthetic(data), &AblationOptions::default())
            .expect("full model on synthetic data");
        self.full.insert(family, r.clone());
        r
    }
}

fn gradient_oracle() -> Outcome {
    let cfg = TrainConfig {
        layers: 2,
        layer_size: 8,
        ff_size: 16,
        scales: vec![0.5, 3.0],
        dropout: 0.2,
        lambda_init: 0.3,
        ..Default::default()
    };
    let model = init_model(&cfg, 1, &Rng::new(7)).unwrap();
    let mut rng = Rng::new(107);
    let lookback = randn(&mut rng, 16, 2, 1.0);
    let target = randn(&mut rng, 8, 2, 1.0);
    let (_, cache) = forecast(&model, &lookback, 8, Mode::Train, &mut Rng::new(3)).unwrap();
    let masks = cache.inr().masks();
    let mut worst = 0.0f64;
    let mut branches = Vec::new();
    for branch in [RidgeBranch::Standard, RidgeBranch::Woodbury] {
        let (preds, cache) = forecast_with_branch(&model, &lookback, 8, &masks, branch).unwrap();
        branches.push(cache.used_woodbury().unwrap());
        let d = loss_mse_grad(&preds, &target).unwrap();
        let grads = forecast_backward(&model, &cache, &d).unwrap();
        let err = model_fd_error(&model, &grads, 1e-5, |m| {
            let (p, _) = forecast_with_branch(m, &lookback, 8, &masks, branch).unwrap();
            loss_mse(&p, &target).unwrap()
        });
        worst = worst.max(err);
    }
    Outcome::check(
        worst <= 1e-4 && branches == [false, true],
        format!("max rel err {worst:.2e} over standard and Woodbury branches (limit 1e-4)"),
    )
}

fn ridge_correctness() -> Outcome {
    let mut rng = Rng::new(2024);
    let mut worst_residual = 0.0f64;
    for _ in 0..200 {
        let n = 1 + rng.below(20);
        let d = 1 + rng.below(20);
        let bias = rng.next_f64() < 0.5;
        let z = randn(&mut rng, n, d, 1.0);
        let m = 1 + rng.below(3);
        let y = randn(&mut rng, n, m, 1.0);
        let lam = 1e-2 + rng.next_f64();
        let w = ridge_fit(&z, &y, lam, bias).unwrap().weights;
        let za = if bias { z.with_ones_column() } else { z };
        let mut lhs = Matrix::gemm(Op::T, &za, Op::N, &za).matmul(&w);
        let mut reg = w.clone();
        reg.scale_inplace(lam);
        lhs.add_assign(&reg);
        let rhs = Matrix::gemm(Op::T, &za, Op::N, &y);
        worst_residual = worst_residual.max(lhs.sub(&rhs).frobenius_norm() / (1.0 + rhs.frobenius_norm()));
    }

    let mut worst_branch = 0.0f64;
    for n in 1..=12 {
        for d in 1..=12 {
            let z = randn(&mut rng, n, d, 1.0);
            let y = randn(&mut rng, n, 2, 1.0);
            let a = RidgeFit::new(&z, &y, 0.7, true, RidgeBranch::Standard).unwrap();
            let b = RidgeFit::new(&z, &y, 0.7, true, RidgeBranch::Woodbury).unwrap();
            worst_branch = worst_branch.max(a.weights().max_abs_diff(b.weights()));
        }
    }

    let cfg = TrainConfig {
        layers: 2,
        layer_size: 8,
        ff_size: 16,
        dropout: 0.0,
        ..Default::default()
    };
    let model = init_model(&cfg, 1, &Rng::new(21)).unwrap();
    let tau = make_time_index(16, 8);
    let (reprs, _) = inr_forward(&model, &tau, Mode::Eval, &mut Rng::new(0)).unwrap();
    let z = reprs.slice_rows(0, 16);
    let y = randn(&mut Rng::new(5), 16, 2, 1.0);
    let lam = 0.5;
    let closed = ridge_fit(&z, &y, lam, true).unwrap().weights;
    let za = z.with_ones_column();
    let gram = Matrix::gemm(Op::T, &za, Op::N, &za);
    let zty = Matrix::gemm(Op::T, &za, Op::N, &y);
    let top = gram.trace() + lam;
    let step = 1.0 / (2.0 * top);
    let mut w = Matrix::zeros(za.cols(), 2);
    for _ in 0..10_000 {
        let mut g = gram.matmul(&w).sub(&zty);
        let mut reg = w.clone();
        reg.scale_inplace(lam);
        g.add_assign(&reg);
        g.scale_inplace(2.0 * step);
        w = w.sub(&g);
    }
    let gd_diff = closed.max_abs_diff(&w);

    Outcome::check(
        worst_residual <= 1e-7 && worst_branch <= 1e-8 && gd_diff <= 1e-3,
        format!(
            "(a) residual {worst_residual:.2e} <= 1e-7, (b) branch gap {worst_branch:.2e} <= 1e-8, (c) GD gap {gd_diff:.2e} <= 1e-3"
        ),
    )
}

fn synthetic_extrapolation(shared: &mut Shared) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (family, need) in [(Family::Linear, 10.0), (Family::Cubic, 3.0), (Family::Sines, 3.0)] {
        let started = Instant::now();
        let r = shared.full(family);
        let secs = started.elapsed().as_secs_f64();
        let ratio = r.baseline.mse / r.metrics.mse;
        ok &= ratio >= need && r.metrics.n_windows == 100 && secs < 20.0 * 60.0;
        parts.push(format!("{} {ratio:.1}x (need {need}x, {secs:.0}s)", family.name()));
    }
    Outcome::check(ok, format!("baseline/model MSE: {}", parts.join(", ")))
}

fn ablation_orderings(shared: &mut Shared) -> Outcome {
    let cfg = synthetic_train_config();
    let full = shared.full(Family::Sines);
    let data = shared.data(Family::Sines);
    let source = AblationSource::Synthetic(data);
    let opts = AblationOptions {
        local: LocalOptions {
            val_windows: Some(20),
            ..Default::default()
        },
        ..Default::default()
    };
    let mse = |v: AblationVariant| run_ablation(v, &cfg, &source, &opts).expect("ablation run").0.metrics.mse;
    let no_cff = mse(AblationVariant::NoCff);
    let no_rr = mse(AblationVariant::NoRr);
    let local = mse(AblationVariant::Local);
    let f = full.metrics.mse;
    Outcome::check(
        f <= no_cff && f <= local && no_rr >= 2.0 * f,
        format!("sines MSE: full {f:.4}, no_cff {no_cff:.4}, local {local:.4}, no_rr {no_rr:.4} ({:.1}x full)", no_rr / f),
    )
}

fn ettm2_reproduction() -> Outcome {
    let Ok(path) = std::env::var("DEEPTIME_ETTM2_CSV") else {
        return Outcome::skip("set DEEPTIME_ETTM2_CSV to the ETTm2 CSV to run");
    };
    let ts = match load_csv(&path, TargetMode::Multivariate) {
        Ok(ts) => ts,
        Err(e) => return Outcome::check(false, format!("cannot load {path}: {e}")),
    };
    let data = PreparedSeries::new(&ts, &SplitSpec::ettm2(), false).expect("ETTm2 split");
    let cfg = TrainConfig::default();
    match sweep_mu(&cfg, &data, &SweepOptions::default()) {
        Ok((r, _)) => Outcome::check(
            r.test.mse <= 0.20,
            format!("test MSE {:.4} at mu {} (limit 0.20)", r.test.mse, r.chosen_mu),
        ),
        Err(e) => Outcome::check(false, format!("sweep failed: {e}")),
    }
}

fn scale_methodology(shared: &mut Shared) -> Outcome {
    let cfg = synthetic_train_config();
    let cff = shared.full(Family::Sines).metrics.mse;
    let data = shared.data(Family::Sines);
    let source = AblationSource::Synthetic(data);
    let mut runs = Vec::new();
    for &scale in &cfg.scales {
        let single = TrainConfig {
            scales: vec![scale],
            ..cfg.clone()
        };
        let (r, _) = run_ablation(AblationVariant::Full, &single, &source, &AblationOptions::default()).expect("single scale");
        runs.push((scale, r.metrics.mse));
    }
    let best = runs.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let worst = runs.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let vs_best = cff_change(cff, best.1);
    let vs_worst = cff_change(cff, worst.1);
    Outcome::check(
        vs_best <= 0.10 && vs_worst <= -0.10,
        format!(
            "CFF {:+.1}% vs best scale {} and {:+.1}% vs worst scale {} (limits +10% / -10%)",
            100.0 * vs_best,
            best.0,
            100.0 * vs_worst,
            worst.0
        ),
    )
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> Value {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_deeptime"))
            .args(["--out", out.to_str().unwrap(), "synth", "--family", "linear", "--seed", "7"])
            .env_remove("DEEPTIME_OUT")
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let text = std::fs::read_to_string(out.join("report.json")).unwrap();
        serde_json::from_str::<Value>(&text).unwrap()["result"].clone()
    };
    let a = run("a");
    let b = run("b");
    let bits = |v: &Value| -> Vec<u64> {
        v["metrics"]["per_window"]
            .as_array()
            .unwrap()
            .iter()
            .map(|w| w["mse"].as_f64().unwrap().to_bits())
            .collect()
    };
    Outcome::check(
        a == b && bits(&a) == bits(&b) && a["metrics"]["n_windows"] == 100,
        format!("two runs, mean MSE {:e}, results identical: {}", a["metrics"]["mse"].as_f64().unwrap(), a == b),
    )
}

fn profiling_sanity() -> Outcome {
    let opts = ProfileOptions {
        horizons: vec![],
        repeats: 3,
        ..Default::default()
    };
    let table = profile(&TrainConfig::default(), &opts).expect("profile");
    let secs: Vec<String> = table
        .by_lookback
        .iter()
        .map(|r| format!("L={} {:.3}s{}", r.lookback, r.seconds, if r.used_woodbury { " (woodbury)" } else { "" }))
        .collect();
    let (low, high) = (table.lookback_slope_low.unwrap_or(f64::NAN), table.lookback_slope_high.unwrap_or(f64::NAN));
    Outcome::check(
        high <= 1.5,
        format!("log-log slope low {low:.2}, high {high:.2} (high must be <= 1.5); {}", secs.join(", ")),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("DEEPTIME_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().map_or(true, |o| o.contains(&n));
    let mut shared = Shared::default();
    let criteria: Vec<(u32, &str, Box<dyn FnOnce(&mut Shared) -> Outcome>)> = vec![
        (1, "gradient oracle", Box::new(|_| gradient_oracle())),
        (2, "ridge correctness", Box::new(|_| ridge_correctness())),
        (3, "synthetic extrapolation", Box::new(synthetic_extrapolation)),
        (4, "ablation orderings", Box::new(ablation_orderings)),
        (5, "ETTm2 reproduction", Box::new(|_| ettm2_reproduction())),
        (6, "CFF vs single scales", Box::new(scale_methodology)),
        (7, "determinism", Box::new(|_| cli_determinism())),
        (8, "profiling sanity", Box::new(|_| profiling_sanity())),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !wanted(n) {
            continue;
        }
        let started = Instant::now();
        let outcome = run(&mut shared);
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!(
            "criterion {n} ({name}): {tag} [{:.1}s] {}",
            started.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
