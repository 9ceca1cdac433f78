//! Metrics, benchmark runs, the lookback sweep, ablations and self-profiling.

pub mod ablation;
pub mod evaluate;
pub mod local;
pub mod metrics;
pub mod profile;
pub mod protocol;
pub mod scales;
pub mod sweep;

pub use ablation::{run_ablation, AblationOptions, AblationResult, AblationSource, AblationVariant};
pub use evaluate::{dump_forecasts, evaluate, evaluate_tasks, forecast_series, EvalOptions, LastValue, WindowForecaster};
pub use local::{fit_window, local_forecasts, LocalOptions};
pub use metrics::{mae, mse, Metrics, MetricsAccumulator, WindowMetrics};
pub use profile::{loglog_slope, profile, profile_point, ProfileOptions, ProfileRow, ProfileTable};
pub use protocol::{fit_series, fit_synthetic, synthetic_split, PreparedSeries, SplitExtras};
pub use scales::{scale_comparison, ScaleComparison, ScaleRun};
pub use sweep::{select_best, sweep_mu, sweep_with, SweepOptions, SweepResult, SweepRow, MU_GRID};
