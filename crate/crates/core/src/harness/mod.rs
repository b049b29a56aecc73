//! Optimizer, configuration, checkpoints, training and evaluation.

mod checkpoint;
mod config;
mod dataset;
mod eval;
mod gradcheck;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::{default_degradation, degradation_fits, Loss, TrainConfig};
pub use dataset::{load_dataset, prepare_for_task};
pub use eval::{evaluate, restore, MetricsRow, MetricsTable};
pub use gradcheck::model_gradcheck;
pub use optim::{lr_at, AdamOptimizer};
pub use train::{batch_psnr, sampler_for, train, train_step, LogLine, TrainReport};
