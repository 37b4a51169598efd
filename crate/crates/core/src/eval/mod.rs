//! Downstream probes: task construction, a two-layer perceptron trained
//! with a small grid search, and the AUC / R2 metrics.

mod metrics;
mod probe;
mod tasks;

pub use metrics::{auc, r2};
pub use probe::{
    features, loss_and_gradient, train_probe, train_probe_data, GridCell, Loss, Mlp, Optimizer, ProbeConfig, ProbeData,
    ProbeModel, ProbeResult,
};
pub use tasks::{assign_splits, build_tasks, twin_task, Example, Split, TaskConfig, TaskDataset, TaskKind, TaskSuite};
