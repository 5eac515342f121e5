//! Task scheduling, staleness control and the training loop.
//!
//! Each interval walks a fixed chain of tasks per epoch (see
//! [`ChainShape::chain`]). [`IntervalProgress`] decides which tasks may run:
//! in pipe mode every Gather waits for the whole layer and each epoch waits
//! for the previous epoch's weight updates; in async mode a Gather only
//! waits for the neighbours it reads, accepting values up to `S` epochs old.
//!
//! [`run_epochs`] drives everything on a virtual clock. Graph tasks run on
//! per-partition worker threads, tensor tasks on the simulated fleet, weight
//! updates on the accumulator PS. Numerics are computed when a task starts
//! and become visible when it completes.

mod config;
mod engine;
mod report;
mod scheduler;
mod task;

pub use config::{
    AutotuneConfig, EngineConfig, GraphServerModel, ParamServerModel, TargetMetric, TrainingData,
};
pub use engine::{initial_weights, run_epochs, run_epochs_with};
pub use report::{
    BroadcastRecord, Captured, EpochRecord, GatherAudit, MixingAudit, QueueSample, RunStatus,
    TrainingReport, WeightAudit,
};
pub use scheduler::{
    check_gather_admissible, Admission, IntervalProgress, IntervalState, PipelineMode,
};
pub use task::{ChainShape, Step, Task, TaskKind};

use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no runnable task at t={time_us} µs: {detail}")]
    Deadlock { time_us: u64, detail: String },
    #[error("internal invariant broken: {0}")]
    Invariant(String),
}
