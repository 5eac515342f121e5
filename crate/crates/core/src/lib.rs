//! Core of a distributed GNN training engine that keeps graph-parallel work
//! (Gather/Scatter over a partitioned CSR graph) apart from tensor-parallel
//! work (ApplyVertex/ApplyEdge on a simulated serverless fleet).
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs, including the discrete-event simulation that drives
//! the pipeline: identical configuration and seed produce identical reports.
//!
//! Module map:
//!
//! - [`tensor`]: dense kernels, loss, initialisation, optimisers
//! - [`graph`]: CSR construction, normalised adjacency, partitions, intervals
//! - [`gnn`]: the per-interval task kernels and a dense reference model
//! - [`pipeline`]: task scheduler, staleness control and the training loop
//! - [`paramserver`]: replicated weights, stashes and weight updates
//! - [`serverless`]: fleet model, autotuner, wire protocol
//! - [`cost`]: price tables, usage ledger and the value metric
//! - [`synth`]: deterministic stochastic-block-model datasets

#![no_std]
#![cfg_attr(docsrs, feature(doc_auto_cfg))]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod cost;
pub mod gnn;
pub mod graph;
pub mod paramserver;
pub mod pipeline;
pub mod serverless;
pub mod synth;
pub mod tensor;

mod error;

pub use error::Error;
