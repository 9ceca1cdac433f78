use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::forecaster::{batch_loss_grad, SharedIndex, Task};
use crate::inr::init_forecaster;
use crate::numkit::rng::streams;
use crate::numkit::{randn, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    /// Lookbacks timed at `fixed_horizon`.
    pub lookbacks: Vec<usize>,
    pub fixed_horizon: usize,
    /// Horizons timed at `fixed_lookback`.
    pub horizons: Vec<usize>,
    pub fixed_lookback: usize,
    pub batch: usize,
    pub repeats: usize,
    pub channels: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            lookbacks: vec![48, 96, 192, 384, 768],
            fixed_horizon: 48,
            horizons: vec![48, 96, 192, 384, 768],
            fixed_lookback: 48,
            batch: 32,
            repeats: 5,
            channels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub lookback: usize,
    pub horizon: usize,
    pub batch: usize,
    /// Median wall-clock seconds of one forward and backward pass.
    pub seconds: f64,
    pub runs: Vec<f64>,
    /// Growth of the peak resident set during the runs, where the platform reports it.
    pub peak_bytes: Option<u64>,
    pub used_woodbury: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub by_lookback: Vec<ProfileRow>,
    pub by_horizon: Vec<ProfileRow>,
    /// Log-log slope of time against lookback over the upper half of the grid.
    pub lookback_slope_high: Option<f64>,
    pub lookback_slope_low: Option<f64>,
}

fn read_status_kib(field: &str) -> Option<u64> {
    let text = std::fs::read_to_string("/proc/self/status").ok()?;
    text.lines()
        .find(|l| l.starts_with(field))?
        .split_whitespace()
        .nth(1)?
        .parse()
        .ok()
}

/// Resets the kernel's peak-RSS mark and returns the current RSS in bytes.
fn reset_peak() -> Option<u64> {
    std::fs::write("/proc/self/clear_refs", "5").ok()?;
    read_status_kib("VmRSS:").map(|k| k * 1024)
}

fn peak() -> Option<u64> {
    read_status_kib("VmHWM:").map(|k| k * 1024)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times one training step (forward and backward) on a random batch.
pub fn profile_point(cfg: &TrainConfig, lookback: usize, horizon: usize, batch: usize, repeats: usize, channels: usize) -> Result<ProfileRow> {
    if lookback == 0 || horizon == 0 || batch == 0 || repeats == 0 || channels == 0 {
        return Err(Error::InvalidConfig("profile sizes must be >= 1".into()));
    }
    let root = Rng::new(cfg.seed);
    let model = init_forecaster(cfg, 1, channels, &root)?;
    let mut data_rng = root.fork(streams::DATA);
    let tasks: Vec<Task> = (0..batch)
        .map(|i| {
            Task::new(
                randn(&mut data_rng, lookback, channels, 1.0),
                randn(&mut data_rng, horizon, channels, 1.0),
                i,
            )
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Task> = tasks.iter().collect();
    let shared = SharedIndex::new(&model, lookback, horizon)?;
    let width = model.width() + 1;
    let mut runs = Vec::with_capacity(repeats);
    let base = reset_peak();
    for r in 0..repeats {
        let mut rng = root.fork(streams::DROPOUT).fork(r as u64);
        let started = Instant::now();
        let (loss, _) = batch_loss_grad(&model, &refs, Some(&shared), cfg.dropout_masks, &mut rng)?;
        runs.push(started.elapsed().as_secs_f64());
        if !loss.is_finite() {
            return Err(Error::NonFinite("profile loss".into()));
        }
    }
    let peak_bytes = match (base, peak()) {
        (Some(b), Some(p)) => Some(p.saturating_sub(b)),
        _ => None,
    };
    Ok(ProfileRow {
        lookback,
        horizon,
        batch,
        seconds: median(&runs),
        runs,
        peak_bytes,
        used_woodbury: lookback < width,
    })
}

/// Times the lookback sweep at a fixed horizon and the horizon sweep at a fixed lookback.
pub fn profile(cfg: &TrainConfig, opts: &ProfileOptions) -> Result<ProfileTable> {
    cfg.validate()?;
    if opts.lookbacks.is_empty() && opts.horizons.is_empty() {
        return Err(Error::InvalidConfig("profile needs at least one grid point".into()));
    }
    let by_lookback = opts
        .lookbacks
        .iter()
        .map(|&l| profile_point(cfg, l, opts.fixed_horizon, opts.batch, opts.repeats, opts.channels))
        .collect::<Result<Vec<_>>>()?;
    let by_horizon = opts
        .horizons
        .iter()
        .map(|&h| profile_point(cfg, opts.fixed_lookback, h, opts.batch, opts.repeats, opts.channels))
        .collect::<Result<Vec<_>>>()?;
    let (low, high) = lookback_slopes(&by_lookback);
    Ok(ProfileTable {
        by_lookback,
        by_horizon,
        lookback_slope_high: high,
        lookback_slope_low: low,
    })
}

/// Slopes over the lower and upper halves of a lookback sweep (sharing the midpoint).
pub fn lookback_slopes(rows: &[ProfileRow]) -> (Option<f64>, Option<f64>) {
    if rows.len() < 3 {
        return (None, None);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.lookback as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    let mid = rows.len() / 2;
    (loglog_slope(&xs[..=mid], &ys[..=mid]), loglog_slope(&xs[mid..], &ys[mid..]))
}
