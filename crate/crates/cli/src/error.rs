use std::fmt;

use mecross::corpus::CorpusError;
use mecross::flowcore::FlowError;
use mecross::model::ModelError;
use mecross::protocol::ProtocolError;
use mecross::ErrorKind;

/// A failed command: the message chain plus the class that picks the exit
/// code.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Config,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Data,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Internal => 4,
        }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(ctx),
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self { kind: e.kind(), error: e.into() }
            }
        }
    )*};
}

from_core!(CorpusError, FlowError, ModelError, ProtocolError, mecross::Error);

pub type CliResult<T = ()> = Result<T, CliError>;

/// Attaches context to any core error on the way up.
pub trait Context<T> {
    fn with_context<C: fmt::Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn with_context<C: fmt::Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> CliResult<T> {
        self.map_err(|e| e.into().context(f()))
    }
}
