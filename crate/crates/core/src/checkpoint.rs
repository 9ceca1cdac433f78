//! Bit-exact model snapshots as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::{DatetimeFeature, SplitSpec, Standardizer, TargetMode};
use crate::error::{Error, Result};
use crate::forecaster::TrainReport;
use crate::inr::InrModel;

pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: TrainConfig,
    pub model: InrModel,
    pub lookback: usize,
    pub horizon: usize,
    pub target: TargetMode,
    pub split: SplitSpec,
    pub normalization: Standardizer,
    /// Calendar features appended to the time-index, in column order.
    #[serde(default)]
    pub datetime_features: Option<Vec<DatetimeFeature>>,
    #[serde(default)]
    pub report: Option<TrainReport>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let format = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_SCHEMA as u64 => {}
            Some(v) => return Err(format(format!("unsupported checkpoint schema {v}, expected {CHECKPOINT_SCHEMA}"))),
            None => return Err(format("missing schema_version".into())),
        }
        let ck: Checkpoint = serde_json::from_value(value).map_err(|e| format(e.to_string()))?;
        ck.config.validate()?;
        Ok(ck)
    }
}
