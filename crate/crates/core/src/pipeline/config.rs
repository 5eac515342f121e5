use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{PipelineError, PipelineMode};
use crate::cost::PriceTable;
use crate::graph::{Graph, PartitionId};
use crate::serverless::ExecutorConfig;
use crate::synth::Dataset;
use crate::tensor::{Matrix, OptimizerKind};

/// Graph-server timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphServerModel {
    /// Worker threads per graph server.
    pub threads: usize,
    /// Cost of one (edge, feature) multiply-add in a Gather.
    pub ns_per_edge_element: f64,
    pub task_overhead_us: u64,
    pub network_gbps: f64,
    pub network_latency_us: u64,
    pub instance: String,
}

impl Default for GraphServerModel {
    fn default() -> Self {
        Self {
            threads: 2,
            ns_per_edge_element: 1.0,
            task_overhead_us: 20,
            network_gbps: 10.0,
            network_latency_us: 50,
            instance: "c5.base".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamServerModel {
    pub replicas: usize,
    /// Per weight element per contribution summed.
    pub ns_per_element: f64,
    pub update_overhead_us: u64,
    pub broadcast_latency_us: u64,
    /// Broadcast after this many weight updates. Pipe mode also broadcasts
    /// at the end of every epoch.
    pub broadcast_every: u32,
    pub instance: String,
}

impl Default for ParamServerModel {
    fn default() -> Self {
        Self {
            replicas: 2,
            ns_per_element: 1.0,
            update_overhead_us: 50,
            broadcast_latency_us: 200,
            broadcast_every: 1,
            instance: "c5.base".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutotuneConfig {
    pub enabled: bool,
    /// Fixed starting fleet per graph server; defaults to min(intervals, 100).
    pub initial: Option<usize>,
    pub max_lambdas: usize,
    pub window: usize,
    pub sample_period_us: u64,
}

impl Default for AutotuneConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            initial: None,
            max_lambdas: 100,
            window: 10,
            sample_period_us: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMetric {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Hidden widths; the model has `hidden.len() + 1` layers.
    pub hidden: Vec<usize>,
    pub mode: PipelineMode,
    pub partitions: usize,
    /// Intervals per partition.
    pub intervals: usize,
    /// Vertex → partition; round-robin when absent.
    pub assignment: Option<Vec<PartitionId>>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_epochs: u32,
    pub target_accuracy: Option<f64>,
    pub target_metric: TargetMetric,
    /// Stop after this many consecutive epochs whose metric moved by less
    /// than 0.001.
    pub plateau_patience: Option<u32>,
    pub fuse: bool,
    pub remat: bool,
    pub apply_edge: bool,
    pub executor: ExecutorConfig,
    pub graph_server: GraphServerModel,
    pub param_server: ParamServerModel,
    pub autotune: AutotuneConfig,
    /// Hash every scattered and gathered row to check the mixing property.
    pub record_mixing: bool,
    /// Keep the logits and summed weight gradients of this epoch.
    pub capture_epoch: Option<u32>,
    pub prices: PriceTable,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            mode: PipelineMode::Pipe,
            partitions: 1,
            intervals: 4,
            assignment: None,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            seed: 0,
            max_epochs: 100,
            target_accuracy: None,
            target_metric: TargetMetric::Validation,
            plateau_patience: None,
            fuse: false,
            remat: false,
            apply_edge: false,
            executor: ExecutorConfig::default(),
            graph_server: GraphServerModel::default(),
            param_server: ParamServerModel::default(),
            autotune: AutotuneConfig::default(),
            record_mixing: false,
            capture_epoch: None,
            prices: PriceTable::default(),
        }
    }
}

impl EngineConfig {
    pub fn layers(&self) -> usize {
        self.hidden.len() + 1
    }

    /// `[features, hidden…, classes]`.
    pub fn dims(&self, features: usize, classes: usize) -> Vec<usize> {
        let mut d = vec![features];
        d.extend(&self.hidden);
        d.push(classes);
        d
    }

    pub fn validate(&self, data: &TrainingData) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.partitions == 0 || self.intervals == 0 {
            return bad("partitions and intervals must be at least 1".to_string());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".to_string());
        }
        if self.layers() > u8::MAX as usize {
            return bad(format!(
                "{} layers exceed the wire format's limit",
                self.layers()
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning rate must be positive".to_string());
        }
        if self.graph_server.threads == 0
            || self.param_server.replicas == 0
            || self.param_server.broadcast_every == 0
        {
            return bad(
                "graph-server threads, PS replicas and broadcast period must be at least 1"
                    .to_string(),
            );
        }
        if self.autotune.max_lambdas == 0
            || self.autotune.initial == Some(0)
            || self.autotune.sample_period_us == 0
        {
            return bad("fleet sizes and the sampling period must be at least 1".to_string());
        }
        if let Some(a) = &self.assignment {
            if a.len() != data.num_vertices() {
                return bad(format!(
                    "assignment covers {} of {} vertices",
                    a.len(),
                    data.num_vertices()
                ));
            }
        }
        if data.num_vertices() < self.partitions * self.intervals {
            return bad(format!(
                "{} vertices cannot fill {} partitions × {} intervals",
                data.num_vertices(),
                self.partitions,
                self.intervals
            ));
        }
        Ok(())
    }
}

/// Graph, features, labels and the train/validation split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub graph: Graph,
    pub features: Matrix<f32>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
}

impl TrainingData {
    /// Every fifth vertex (`v % 5 == 4`) is held out for validation.
    pub fn new(
        graph: Graph,
        features: Matrix<f32>,
        labels: Vec<u32>,
        num_classes: usize,
    ) -> Result<Self, PipelineError> {
        let n = labels.len();
        let val_mask: Vec<bool> = (0..n).map(|v| v % 5 == 4).collect();
        let train_mask = val_mask.iter().map(|&v| !v).collect();
        Self::with_masks(graph, features, labels, num_classes, train_mask, val_mask)
    }

    pub fn with_masks(
        graph: Graph,
        features: Matrix<f32>,
        labels: Vec<u32>,
        num_classes: usize,
        train_mask: Vec<bool>,
        val_mask: Vec<bool>,
    ) -> Result<Self, PipelineError> {
        let n = graph.num_vertices();
        if features.rows() != n || labels.len() != n || train_mask.len() != n || val_mask.len() != n
        {
            return Err(PipelineError::Config(format!(
                "graph has {n} vertices but features/labels/masks have {}/{}/{}/{}",
                features.rows(),
                labels.len(),
                train_mask.len(),
                val_mask.len()
            )));
        }
        if num_classes == 0 {
            return Err(PipelineError::Config("need at least one class".to_string()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(PipelineError::Config(format!(
                "label {l} with {num_classes} classes"
            )));
        }
        if !train_mask.contains(&true) {
            return Err(PipelineError::Config("empty training mask".to_string()));
        }
        Ok(Self {
            graph,
            features,
            labels,
            num_classes,
            train_mask,
            val_mask,
        })
    }

    pub fn from_dataset(d: Dataset) -> Result<Self, PipelineError> {
        Self::new(d.graph, d.features, d.labels, d.num_classes)
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn train_count(&self) -> usize {
        self.train_mask.iter().filter(|&&m| m).count()
    }
}
