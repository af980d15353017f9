//! Configuration, the optimization loop, evaluation and ablation grids.

pub mod ablate;
pub mod config;
pub mod evaluate;
pub mod schedule;
pub mod train;

pub use ablate::{ablate, AblationRow, AblationTable};
pub use config::{AblationDelta, DataConfig, RunConfig};
pub use evaluate::{evaluate, predict_video, EvalOutcome};
pub use schedule::lr_schedule;
pub use train::{sgd_step, train, EpochRecord, TrainLog, TrainOutcome};
