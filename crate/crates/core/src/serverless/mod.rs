//! Simulated serverless fleet: timing model, autotuner, wire format and the
//! transport seam.

mod autotune;
mod fleet;
mod transport;
mod wire;

pub use autotune::{autotune_step, initial_fleet_size, Autotuner};
pub use fleet::{
    apply_edge_work, apply_vertex_work, grad_apply_vertex_work, inject_straggler, Executor,
    ExecutorConfig, Invocation, InvocationTiming, LambdaSpec, NetworkModel, Outcome, StragglerPlan,
    TaskRef, TensorKind, TensorWork,
};
pub use transport::{InProcess, Transport};
pub use wire::{
    decode_header, decode_message, encode_message, Header, Message, MessageType, HEADER_LEN, MAGIC,
};

use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("payload length {0} overflows")]
    LengthOverflow(u64),
    #[error("payload length {0} is not a whole number of 4-byte reals")]
    Misaligned(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("transport io: {0}")]
    Io(String),
    #[error("no endpoint for partition {0}")]
    UnknownPeer(usize),
    #[error("connection closed")]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServerlessError {
    #[error("invocation {seq} timed out twice ({timeout_us} µs limit)")]
    RepeatedTimeout { seq: u64, timeout_us: u64 },
    #[error("fleet size must be at least 1")]
    EmptyFleet,
}
