use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate, evaluate_tasks, EvalOptions, LastValue};
use super::local::{local_forecasts, spread_indices, LocalOptions};
use super::metrics::{Metrics, MetricsAccumulator};
use super::protocol::{fit_series, fit_synthetic, synthetic_split, PreparedSeries};
use super::sweep::select_best;
use crate::config::{HeadKind, InputFeatures, TrainConfig};
use crate::data::{windows_range, SyntheticData};
use crate::error::{Error, Result};
use crate::forecaster::{Task, TrainReport};
use crate::inr::InrModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    /// Fourier features replaced by a linear map of the time-index.
    NoCff,
    /// Ridge head replaced by one linear layer trained across all windows.
    NoRr,
    /// Calendar features appended to the time-index.
    PlusDatetime,
    /// A fresh network fitted to each lookback window, no meta-training.
    Local,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 5] = [
        AblationVariant::Full,
        AblationVariant::NoCff,
        AblationVariant::NoRr,
        AblationVariant::PlusDatetime,
        AblationVariant::Local,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoCff => "no_cff",
            AblationVariant::NoRr => "no_rr",
            AblationVariant::PlusDatetime => "plus_datetime",
            AblationVariant::Local => "local",
        }
    }

    /// The training configuration this variant runs with.
    pub fn config(self, cfg: &TrainConfig) -> TrainConfig {
        let mut c = cfg.clone();
        match self {
            AblationVariant::NoCff => c.input_features = InputFeatures::Linear,
            AblationVariant::NoRr => c.head = HeadKind::Linear,
            _ => {}
        }
        c
    }
}

impl std::str::FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation variant {s:?}")))
    }
}

pub enum AblationSource<'a> {
    Series(&'a PreparedSeries),
    Synthetic(&'a SyntheticData),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationOptions {
    pub eval: EvalOptions,
    pub local: LocalOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub variant: AblationVariant,
    pub metrics: Metrics,
    /// Last-value baseline on the same windows.
    pub baseline: Metrics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_report: Option<TrainReport>,
    /// Local variant: `(epochs, validation mse)` per candidate and the selected count.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub local_validation: Option<Vec<(usize, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub local_epochs: Option<usize>,
}

/// Trains and scores `variant` under the same protocol as the full model.
///
/// Returns the trained model for the meta-trained variants.
pub fn run_ablation(
    variant: AblationVariant,
    cfg: &TrainConfig,
    source: &AblationSource<'_>,
    opts: &AblationOptions,
) -> Result<(AblationResult, Option<InrModel>)> {
    let vcfg = variant.config(cfg);
    vcfg.validate()?;
    match source {
        AblationSource::Series(data) => {
            if (variant == AblationVariant::PlusDatetime) != data.extras.is_some() {
                return Err(Error::InvalidConfig(format!(
                    "variant {} needs the series prepared {} datetime features",
                    variant.name(),
                    if variant == AblationVariant::PlusDatetime { "with" } else { "without" }
                )));
            }
            let (l, h) = (vcfg.lookback(), vcfg.horizon);
            if variant == AblationVariant::Local {
                let val_all = data.val_tasks(l, h)?;
                let val: Vec<Task> = match opts.local.val_windows {
                    Some(n) => spread_indices(val_all.len(), n).into_iter().map(|i| val_all[i].clone()).collect(),
                    None => val_all,
                };
                let test = data.test();
                let tasks = windows_range(test, l, h, None, 0..test.len())?;
                let baseline = evaluate(&LastValue, test, None, l, h, &opts.eval)?;
                let keys: Vec<usize> = tasks.iter().map(|t| t.start).collect();
                let unscale = test.normalization.as_ref().filter(|_| opts.eval.raw_scale);
                return local_result(&vcfg, opts, &val, &tasks, &keys, baseline, unscale);
            }
            let (model, report) = fit_series(&vcfg, data)?;
            let test = data.test();
            let metrics = evaluate(&model, test, data.test_extra(), l, h, &opts.eval)?;
            let baseline = evaluate(&LastValue, test, None, l, h, &opts.eval)?;
            Ok((
                AblationResult {
                    variant,
                    metrics,
                    baseline,
                    train_report: Some(report),
                    local_validation: None,
                    local_epochs: None,
                },
                Some(model),
            ))
        }
        AblationSource::Synthetic(data) => {
            let test = data.test_tasks();
            let baseline = evaluate_tasks(&LastValue, &test, opts.eval.keep_per_window)?;
            match variant {
                AblationVariant::PlusDatetime => Err(Error::InvalidConfig(
                    "synthetic tasks carry no timestamps; plus_datetime needs a dated CSV".into(),
                )),
                AblationVariant::Local => {
                    let (_, val) = synthetic_split(data)?;
                    let val: Vec<Task> = match opts.local.val_windows {
                        Some(n) => spread_indices(val.len(), n).into_iter().map(|i| val[i].clone()).collect(),
                        None => val,
                    };
                    let keys: Vec<usize> = (0..test.len()).collect();
                    local_result(&vcfg, opts, &val, &test, &keys, baseline, None)
                }
                _ => {
                    let (model, report) = fit_synthetic(&vcfg, data)?;
                    let metrics = evaluate_tasks(&model, &test, opts.eval.keep_per_window)?;
                    Ok((
                        AblationResult {
                            variant,
                            metrics,
                            baseline,
                            train_report: Some(report),
                            local_validation: None,
                            local_epochs: None,
                        },
                        Some(model),
                    ))
                }
            }
        }
    }
}

const LOCAL_VAL_STREAM: u64 = 101;
const LOCAL_TEST_STREAM: u64 = 102;

fn local_result(
    cfg: &TrainConfig,
    opts: &AblationOptions,
    val: &[Task],
    test: &[Task],
    keys: &[usize],
    baseline: Metrics,
    unscale: Option<&crate::data::Standardizer>,
) -> Result<(AblationResult, Option<InrModel>)> {
    let val_preds = local_forecasts(cfg, &opts.local, val, LOCAL_VAL_STREAM)?;
    let mut val_mse = Vec::with_capacity(val_preds.len());
    for preds in &val_preds {
        let mut acc = MetricsAccumulator::new(false);
        for (t, p) in val.iter().zip(preds) {
            acc.add(t.start, p, &t.horizon)?;
        }
        val_mse.push(acc.finish()?.mse);
    }
    let best = select_best(&val_mse)?;
    let epochs = opts.local.epochs[best];
    let test_opts = LocalOptions {
        epochs: vec![epochs],
        ..opts.local.clone()
    };
    let preds = local_forecasts(cfg, &test_opts, test, LOCAL_TEST_STREAM)?.remove(0);
    let mut acc = MetricsAccumulator::new(opts.eval.keep_per_window);
    for ((t, p), &key) in test.iter().zip(&preds).zip(keys) {
        match unscale {
            Some(s) => acc.add(key, &s.invert_values(p), &s.invert_values(&t.horizon))?,
            None => acc.add(key, p, &t.horizon)?,
        }
    }
    Ok((
        AblationResult {
            variant: AblationVariant::Local,
            metrics: acc.finish()?,
            baseline,
            train_report: None,
            local_validation: Some(opts.local.epochs.iter().copied().zip(val_mse).collect()),
            local_epochs: Some(epochs),
        },
        None,
    ))
}
