//! Dense linear algebra for tensor tasks.
//!
//! [`Matrix`] is a row-major matrix generic over [`Scalar`] (`f32` for
//! training, `f64` for reference and gradient-check paths). All kernels are
//! pure; the only mutable value is an [`OptimizerState`].

mod init;
mod loss;
mod matrix;
mod optim;

pub use init::{he_init, xavier_bound, xavier_init};
pub use loss::{
    argmax_rows, masked_cross_entropy, softmax_cross_entropy, softmax_rows, LossOutput,
};
pub use matrix::{matmul, relu, relu_backward, Matrix, Precision, Scalar};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("data length {actual} does not match {rows}x{cols}")]
    DataLength {
        rows: usize,
        cols: usize,
        actual: usize,
    },
    #[error("matrix dimensions must be at least 1")]
    ZeroDimension,
    #[error("loss mask selects no rows")]
    EmptyMask,
    #[error("label row {row} is not one-hot")]
    NotOneHot { row: usize },
    #[error("class index {class} out of range for {classes} classes (row {row})")]
    ClassOutOfRange {
        row: usize,
        class: u32,
        classes: usize,
    },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
}
