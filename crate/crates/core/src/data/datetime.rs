use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Calendar features, each an integer scaled to `[0, 1]` over its calendar range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatetimeFeature {
    QuarterOfYear,
    MonthOfYear,
    WeekOfYear,
    DayOfYear,
    DayOfMonth,
    DayOfWeek,
    HourOfDay,
    MinuteOfHour,
    SecondOfMinute,
}

impl DatetimeFeature {
    pub const ALL: [DatetimeFeature; 9] = [
        DatetimeFeature::QuarterOfYear,
        DatetimeFeature::MonthOfYear,
        DatetimeFeature::WeekOfYear,
        DatetimeFeature::DayOfYear,
        DatetimeFeature::DayOfMonth,
        DatetimeFeature::DayOfWeek,
        DatetimeFeature::HourOfDay,
        DatetimeFeature::MinuteOfHour,
        DatetimeFeature::SecondOfMinute,
    ];

    /// Largest integer value; every range starts at zero.
    fn max_value(self) -> f64 {
        match self {
            DatetimeFeature::QuarterOfYear => 3.0,
            DatetimeFeature::MonthOfYear => 11.0,
            DatetimeFeature::WeekOfYear => 52.0,
            DatetimeFeature::DayOfYear => 365.0,
            DatetimeFeature::DayOfMonth => 30.0,
            DatetimeFeature::DayOfWeek => 6.0,
            DatetimeFeature::HourOfDay => 23.0,
            DatetimeFeature::MinuteOfHour => 59.0,
            DatetimeFeature::SecondOfMinute => 59.0,
        }
    }

    fn raw(self, t: &NaiveDateTime) -> f64 {
        let v = match self {
            DatetimeFeature::QuarterOfYear => t.month0() / 3,
            DatetimeFeature::MonthOfYear => t.month0(),
            DatetimeFeature::WeekOfYear => t.iso_week().week0(),
            DatetimeFeature::DayOfYear => t.ordinal0(),
            DatetimeFeature::DayOfMonth => t.day0(),
            DatetimeFeature::DayOfWeek => t.weekday().num_days_from_monday(),
            DatetimeFeature::HourOfDay => t.hour(),
            DatetimeFeature::MinuteOfHour => t.minute(),
            DatetimeFeature::SecondOfMinute => t.second(),
        };
        v as f64
    }

    pub fn value(self, t: &NaiveDateTime) -> f64 {
        self.raw(t) / self.max_value()
    }
}

/// Features that vary at a sampling step of `step_seconds`: anything finer
/// than the step is constant and dropped.
pub fn features_for_step(step_seconds: i64) -> Vec<DatetimeFeature> {
    DatetimeFeature::ALL
        .iter()
        .copied()
        .filter(|f| match f {
            DatetimeFeature::SecondOfMinute => step_seconds < 60,
            DatetimeFeature::MinuteOfHour => step_seconds < 3600,
            DatetimeFeature::HourOfDay => step_seconds < 86_400,
            _ => true,
        })
        .collect()
}

/// `n x 9` matrix with every calendar feature.
pub fn datetime_features(timestamps: &[NaiveDateTime]) -> Matrix {
    datetime_features_selected(timestamps, &DatetimeFeature::ALL)
}

pub fn datetime_features_selected(timestamps: &[NaiveDateTime], features: &[DatetimeFeature]) -> Matrix {
    let mut out = Matrix::zeros(timestamps.len(), features.len());
    for (i, t) in timestamps.iter().enumerate() {
        for (j, f) in features.iter().enumerate() {
            out[(i, j)] = f.value(t);
        }
    }
    out
}

const FORMATS: [&str; 5] = [
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y/%m/%d %H:%M:%S",
    "%Y/%m/%d %H:%M",
];

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    for f in FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Ok(t);
        }
    }
    for f in ["%Y-%m-%d", "%Y/%m/%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, f) {
            return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists"));
        }
    }
    Err(Error::InvalidConfig(format!("unrecognized timestamp {s:?}")))
}

/// Median spacing between consecutive timestamps in seconds.
pub fn median_step_seconds(timestamps: &[NaiveDateTime]) -> Option<i64> {
    let mut steps: Vec<i64> = timestamps
        .windows(2)
        .map(|w| (w[1] - w[0]).num_seconds())
        .collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_unstable();
    Some(steps[steps.len() / 2])
}
