//! Window forecasting and the meta-training loop.

pub mod forward;
pub mod optim;
pub mod task;
pub mod train;

pub use crate::config::TrainConfig;
pub use forward::{
    batch_loss_grad, forecast, forecast_backward, forecast_many, forecast_many_shared, forecast_task,
    forecast_with_branch, loss_mse, loss_mse_grad, ForecastCache, SharedIndex,
};
pub use optim::{adam_update, clip_grad_norm, lr_at, OptimizerState};
pub use task::Task;
pub use train::{train, train_with_validator, validation_loss, EarlyStopping, TrainReport};
