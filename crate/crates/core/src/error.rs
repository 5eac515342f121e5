use thiserror::Error;

use crate::cost::CostError;
use crate::gnn::GnnError;
use crate::graph::GraphError;
use crate::paramserver::PsError;
use crate::pipeline::PipelineError;
use crate::serverless::{ServerlessError, TransportError, WireError};
use crate::synth::SynthError;
use crate::tensor::TensorError;

/// Any error the engine can surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    ParamServer(#[from] PsError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Serverless(#[from] ServerlessError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}
