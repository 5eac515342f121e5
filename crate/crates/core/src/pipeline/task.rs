use serde::{Deserialize, Serialize};

use crate::gnn::Direction;
use crate::serverless::TensorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Gather,
    ApplyVertex,
    Scatter,
    ApplyEdge,
    GradApplyEdge,
    GradApplyVertex,
    GradScatter,
    GradGather,
    WeightUpdate,
    /// Last-layer ApplyVertex and its gradient in one invocation.
    FusedApplyVertex,
}

impl TaskKind {
    pub fn direction(self) -> Direction {
        match self {
            Self::Gather | Self::ApplyVertex | Self::Scatter | Self::ApplyEdge => {
                Direction::Forward
            }
            _ => Direction::Backward,
        }
    }

    /// Runs on the serverless fleet rather than a graph server.
    pub fn is_tensor(self) -> bool {
        self.tensor_kind().is_some()
    }

    pub fn tensor_kind(self) -> Option<TensorKind> {
        Some(match self {
            Self::ApplyVertex => TensorKind::ApplyVertex,
            Self::ApplyEdge => TensorKind::ApplyEdge,
            Self::GradApplyEdge => TensorKind::GradApplyEdge,
            Self::GradApplyVertex => TensorKind::GradApplyVertex,
            Self::FusedApplyVertex => TensorKind::Fused,
            _ => return None,
        })
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::Gather => "GA",
            Self::ApplyVertex => "AV",
            Self::Scatter => "SC",
            Self::ApplyEdge => "AE",
            Self::GradApplyEdge => "∇AE",
            Self::GradApplyVertex => "∇AV",
            Self::GradScatter => "∇SC",
            Self::GradGather => "∇GA",
            Self::WeightUpdate => "WU",
            Self::FusedApplyVertex => "FUSED_AV_∇AV",
        }
    }
}

/// Position of an interval inside one epoch's chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub kind: TaskKind,
    pub layer: usize,
}

impl Step {
    pub const fn new(kind: TaskKind, layer: usize) -> Self {
        Self { kind, layer }
    }

    pub const START: Step = Step::new(TaskKind::Gather, 0);
}

/// Shape of the per-epoch chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainShape {
    pub layers: usize,
    pub fuse: bool,
    pub apply_edge: bool,
}

impl ChainShape {
    /// The step after `s`, or `None` once the epoch's backward pass is done.
    pub fn successor(&self, s: Step) -> Option<Step> {
        use TaskKind::*;
        let last = self.layers - 1;
        let l = s.layer;
        Some(match s.kind {
            Gather if l == last && self.fuse => Step::new(FusedApplyVertex, l),
            Gather => Step::new(ApplyVertex, l),
            ApplyVertex if l < last => Step::new(Scatter, l),
            ApplyVertex if self.apply_edge => Step::new(ApplyEdge, l),
            ApplyVertex => Step::new(GradApplyVertex, l),
            Scatter if self.apply_edge => Step::new(ApplyEdge, l),
            Scatter => Step::new(Gather, l + 1),
            ApplyEdge if l < last => Step::new(Gather, l + 1),
            ApplyEdge => Step::new(GradApplyVertex, l),
            FusedApplyVertex | GradApplyVertex if l == 0 => return None,
            FusedApplyVertex | GradApplyVertex => Step::new(GradScatter, l),
            GradScatter if self.apply_edge => Step::new(GradApplyEdge, l),
            GradScatter => Step::new(GradGather, l),
            GradApplyEdge => Step::new(GradGather, l),
            GradGather => Step::new(GradApplyVertex, l - 1),
            WeightUpdate => return None,
        })
    }

    /// Tasks one interval runs per epoch.
    pub fn chain(&self) -> alloc::vec::Vec<Step> {
        let mut out = alloc::vec![Step::START];
        while let Some(n) = self.successor(*out.last().unwrap()) {
            out.push(n);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Task {
    pub epoch: u32,
    pub layer: usize,
    pub interval: usize,
    pub kind: TaskKind,
}

impl Task {
    pub fn direction(&self) -> Direction {
        self.kind.direction()
    }

    pub fn step(&self) -> Step {
        Step::new(self.kind, self.layer)
    }
}
