pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod forecaster;
pub mod inr;
pub mod numkit;

pub use config::{HeadKind, InputFeatures, MaskSharing, TrainConfig};
pub use error::{Error, Result};
