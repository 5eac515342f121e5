//! File formats, the TCP transport, report output and the command line for
//! [`lambdagnn_core`].

use std::path::PathBuf;

pub mod bsnap;
pub mod cli;
pub mod report;
pub mod transport;

pub use lambdagnn_core as core;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Run(#[from] lambdagnn_core::Error),
}

impl CliError {
    /// 1 for configuration problems, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        use lambdagnn_core::pipeline::PipelineError;
        use lambdagnn_core::Error;
        match self {
            Self::Io(_) | Self::Run(Error::Transport(_) | Error::Wire(_)) => 2,
            Self::Config(_) | Self::Run(Error::Pipeline(PipelineError::Config(_))) => 1,
            Self::Run(_) => 1,
        }
    }
}
