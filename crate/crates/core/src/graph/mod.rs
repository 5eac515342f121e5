//! Graph ingestion, normalised adjacency, edge-cut partitions and vertex
//! intervals.
//!
//! `Â = D̃^(−1/2)(A+I)D̃^(−1/2)` is never materialised: every directed edge
//! `u→v` carries the coefficient `1/√(d̃_u·d̃_v)` and every vertex a self-loop
//! coefficient `1/d̃_v`, where `d̃_x = in_degree(x) + 1`.

mod csr;
mod interval;
mod partition;

pub use csr::{build_graph, symmetrize, Graph};
pub use interval::{inter_interval_edges, split_intervals, VertexInterval};
pub use partition::{parse_assignment, partition_graph, round_robin_assignment, Partition};

use thiserror::Error;

pub type VertexId = u32;
pub type PartitionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex id {vertex} out of range for {num_vertices} vertices")]
    VertexOutOfRange { vertex: u64, num_vertices: usize },
    #[error("duplicate edge {0}->{1}")]
    DuplicateEdge(VertexId, VertexId),
    #[error("self-loop on vertex {0}; self-loops are added analytically")]
    SelfLoop(VertexId),
    #[error("assignment has {actual} entries for {expected} vertices")]
    AssignmentLength { expected: usize, actual: usize },
    #[error("partition ids are not dense: id {0} has no vertices")]
    NonDensePartitionIds(PartitionId),
    #[error("partition {0} is empty")]
    EmptyPartition(PartitionId),
    #[error("line {line}: cannot parse partition id {text:?}")]
    BadAssignmentLine {
        line: usize,
        text: alloc::string::String,
    },
    #[error("cannot split {vertices} vertices into {intervals} intervals")]
    TooManyIntervals { vertices: usize, intervals: usize },
    #[error("graph with {0} vertices is too large to densify")]
    TooLargeToDensify(usize),
}
