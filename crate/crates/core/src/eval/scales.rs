use serde::{Deserialize, Serialize};

use super::ablation::{run_ablation, AblationOptions, AblationSource, AblationVariant};
use super::metrics::Metrics;
use crate::config::{InputFeatures, TrainConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRun {
    pub scale: f64,
    pub metrics: Metrics,
    /// `(mse_cff - mse_scale) / mse_scale`; positive means the concatenation did worse.
    pub cff_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleComparison {
    pub cff: Metrics,
    pub runs: Vec<ScaleRun>,
    pub best_scale: f64,
    pub worst_scale: f64,
    /// Relative change against the best and worst single-scale runs.
    pub change_vs_best: f64,
    pub change_vs_worst: f64,
}

/// Relative MSE change of the concatenated features against one single-scale run.
pub fn cff_change(cff_mse: f64, scale_mse: f64) -> f64 {
    (cff_mse - scale_mse) / scale_mse
}

/// Trains the full model once with every scale concatenated and once per
/// single scale (same feature width), then compares test MSE.
pub fn scale_comparison(cfg: &TrainConfig, source: &AblationSource<'_>, opts: &AblationOptions) -> Result<ScaleComparison> {
    if cfg.input_features != InputFeatures::Fourier || cfg.scales.len() < 2 {
        return Err(Error::InvalidConfig("scale comparison needs Fourier features over at least two scales".into()));
    }
    let (cff, _) = run_ablation(AblationVariant::Full, cfg, source, opts)?;
    let mut runs = Vec::with_capacity(cfg.scales.len());
    for &scale in &cfg.scales {
        let single = TrainConfig {
            scales: vec![scale],
            ..cfg.clone()
        };
        let (r, _) = run_ablation(AblationVariant::Full, &single, source, opts)?;
        runs.push(ScaleRun {
            scale,
            cff_change: cff_change(cff.metrics.mse, r.metrics.mse),
            metrics: r.metrics,
        });
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.metrics.mse.total_cmp(&b.metrics.mse))
        .expect("at least two runs");
    let worst = runs
        .iter()
        .max_by(|a, b| a.metrics.mse.total_cmp(&b.metrics.mse))
        .expect("at least two runs");
    Ok(ScaleComparison {
        best_scale: best.scale,
        worst_scale: worst.scale,
        change_vs_best: best.cff_change,
        change_vs_worst: worst.cff_change,
        cff: cff.metrics,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn change_sign_convention() {
        assert_eq!(cff_change(1.1, 1.0), 0.10000000000000009);
        assert!(cff_change(0.5, 1.0) < 0.0);
    }
}
