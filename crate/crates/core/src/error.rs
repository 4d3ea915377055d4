use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::flowcore::FlowError;
use crate::model::ModelError;
use crate::protocol::ProtocolError;

/// Coarse classification used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags, configs, or parameters supplied by the user.
    Config,
    /// Inputs on disk are missing, malformed, or inconsistent.
    Data,
    /// A numerical or invariant failure inside the pipeline.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Flow(e) => e.kind(),
            Error::Corpus(e) => e.kind(),
            Error::Model(e) => e.kind(),
            Error::Protocol(e) => e.kind(),
            Error::Io { .. } => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
