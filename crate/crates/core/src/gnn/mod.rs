//! Per-interval task kernels for an L-layer GCN and a dense reference model.
//!
//! Forward layer `ℓ` of one interval runs Gather (`ÂH` rows), ApplyVertex
//! (`σ(ÂH·W)`, raw logits on the last layer), Scatter (ship rows along
//! cross-partition edges) and ApplyEdge (identity for GCN). Backward runs the
//! same stages in reverse, multiplying by `Âᵀ` through the out-edge lists.

mod dense;
mod kernels;

pub use dense::{
    dense_oracle_backward, dense_oracle_forward, DenseBackward, DenseForward, DENSE_LIMIT,
};
pub use kernels::{
    apply_edge, apply_vertex, backward_gather, gather, grad_apply_vertex, output_gradient, scatter,
    ChunkKind, ContextStore, DenseRows, Direction, GhostMessage, LayerChunk, RowSource,
    StashedContext,
};

use thiserror::Error;

use crate::graph::{GraphError, VertexId};
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GnnError {
    #[error("no value available for vertex {vertex}")]
    MissingValue { vertex: VertexId },
    #[error("no stashed context for interval {interval} layer {layer} epoch {epoch}")]
    StashMissing {
        interval: usize,
        layer: usize,
        epoch: u32,
    },
    #[error("weight version {got} does not match stashed version {stashed} (interval {interval}, epoch {epoch})")]
    VersionMismatch {
        interval: usize,
        epoch: u32,
        stashed: u64,
        got: u64,
    },
    #[error("chunk of {rows} rows does not fit interval of {expected} vertices")]
    PlanMismatch { rows: usize, expected: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
