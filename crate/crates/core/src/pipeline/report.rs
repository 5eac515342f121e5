use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::TargetMetric;
use crate::cost::CostSummary;
use crate::gnn::Direction;
use crate::serverless::Invocation;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    TargetReached,
    /// The metric stopped moving for the configured patience.
    Converged,
    /// Ran out of epochs without reaching the target.
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    /// Virtual time since the previous epoch completed.
    pub makespan_us: u64,
    pub completed_at_us: u64,
    /// Fleet size summed over graph servers at completion.
    pub lambdas: usize,
    pub invocations: u64,
    /// `consumer − value` epoch distance → rows gathered.
    pub staleness_histogram: BTreeMap<u32, u64>,
}

impl EpochRecord {
    pub fn metric(&self, m: TargetMetric) -> f64 {
        match m {
            TargetMetric::Train => self.train_acc,
            TargetMetric::Validation => self.val_acc,
        }
    }
}

/// One Gather and the epochs of the rows it consumed. Forward layer-0
/// gathers read static features and record no value epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatherAudit {
    pub interval: usize,
    pub layer: usize,
    pub direction: Direction,
    pub consumer_epoch: u32,
    pub value_epochs: BTreeMap<u32, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightAudit {
    pub interval: usize,
    pub epoch: u32,
    pub layer: usize,
    pub forward_version: Option<u64>,
    pub backward_version: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixingAudit {
    pub rows_checked: u64,
    /// Rows that equal no scattered row of the recorded epoch.
    pub mismatched: u64,
    /// Rows from an epoch outside `[e − S, e]`.
    pub out_of_window: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSample {
    pub time_us: u64,
    pub partition: usize,
    pub queue_len: usize,
    pub fleet_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    pub time_us: u64,
    pub version: u64,
    pub replicas_updated: usize,
    /// Stashes alive on any replica when the broadcast landed.
    pub in_flight_stashes: usize,
}

/// Full-graph numbers of one epoch, ordered by global vertex id.
#[derive(Debug, Clone, PartialEq)]
pub struct Captured {
    pub epoch: u32,
    pub logits: Matrix<f32>,
    /// Σ over intervals, per layer, as applied by the weight update.
    pub weight_grads: Vec<Matrix<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub status: RunStatus,
    pub epochs: Vec<EpochRecord>,
    pub total_virtual_us: u64,
    pub staleness_audit: Vec<GatherAudit>,
    pub weight_audit: Vec<WeightAudit>,
    pub mixing: MixingAudit,
    pub invocations: Vec<Invocation>,
    pub apply_edge_executions: u64,
    pub queue_samples: Vec<QueueSample>,
    pub fleet_trajectories: Vec<Vec<usize>>,
    pub broadcasts: Vec<BroadcastRecord>,
    pub max_epoch_gap: u32,
    pub final_weight_version: u64,
    pub cost: CostSummary,
    #[serde(skip)]
    pub captured: Option<Captured>,
    #[serde(skip)]
    pub final_weights: Vec<Matrix<f32>>,
}

impl TrainingReport {
    /// First epoch (1-based count) whose metric reaches `target`.
    pub fn epochs_to(&self, target: f64, metric: TargetMetric) -> Option<u32> {
        self.epochs
            .iter()
            .find(|r| r.metric(metric) >= target)
            .map(|r| r.epoch + 1)
    }

    pub fn mean_makespan_us(&self) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        self.epochs
            .iter()
            .map(|r| r.makespan_us as f64)
            .sum::<f64>()
            / self.epochs.len() as f64
    }

    /// Largest `consumer − value` distance over all audited gathers.
    pub fn max_staleness(&self) -> Option<i64> {
        self.staleness_audit
            .iter()
            .flat_map(|g| {
                g.value_epochs
                    .keys()
                    .map(move |&v| g.consumer_epoch as i64 - v as i64)
            })
            .max()
    }

    pub fn min_staleness(&self) -> Option<i64> {
        self.staleness_audit
            .iter()
            .flat_map(|g| {
                g.value_epochs
                    .keys()
                    .map(move |&v| g.consumer_epoch as i64 - v as i64)
            })
            .min()
    }
}
