//! Loading, splitting, scaling and windowing series, plus synthetic task families.

pub mod csv;
pub mod datetime;
pub mod series;
pub mod synthetic;

pub use self::csv::{load_csv, TargetMode};
pub use datetime::{datetime_features, datetime_features_selected, features_for_step, median_step_seconds, parse_timestamp, DatetimeFeature};
pub use series::{chrono_split, fit_standardizer, window_count, windows, windows_range, windows_with, SplitSpec, Standardizer, TimeSeries};
pub use synthetic::{dump_tasks, gen_synthetic, sine_frequencies, Family, SineTerm, SyntheticData, SyntheticSpec, SyntheticTask, TaskParams};
