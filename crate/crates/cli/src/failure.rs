use std::fmt::Display;

use spforge::dataset::DatasetError;
use spforge::eval::EvalError;
use spforge::fusion::FusionError;
use spforge_ingest::IngestError;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// An error tagged with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T = ()> = Result<T, Failure>;

impl Failure {
    pub fn data(msg: impl Display) -> Self {
        Self { code: EXIT_DATA, error: anyhow::anyhow!("{msg}") }
    }

    pub fn usage(msg: impl Display) -> Self {
        Self { code: EXIT_USAGE, error: anyhow::anyhow!("{msg}") }
    }
}

pub trait Context<T> {
    fn context(self, msg: impl Display) -> CmdResult<T>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn context(self, msg: impl Display) -> CmdResult<T> {
        self.map_err(|e| {
            let f: Failure = e.into();
            Failure { code: f.code, error: f.error.context(msg.to_string()) }
        })
    }
}

fn is_io(e: &spforge::Error) -> bool {
    matches!(
        e,
        spforge::Error::Dataset(DatasetError::Io(_))
            | spforge::Error::Fusion(FusionError::Io(_) | FusionError::Dataset(DatasetError::Io(_)))
            | spforge::Error::Eval(EvalError::Io(_))
    )
}

impl From<spforge::Error> for Failure {
    fn from(e: spforge::Error) -> Self {
        let code = if is_io(&e) { EXIT_RUNTIME } else { EXIT_DATA };
        Self { code, error: e.into() }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                spforge::Error::from(e).into()
            }
        }
    )*};
}
via_core!(DatasetError, FusionError, EvalError, spforge::gbt::GbtError);

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_RUNTIME, error: e.into() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        let code = if e.is_io() { EXIT_RUNTIME } else { EXIT_DATA };
        Self { code, error: e.into() }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let code = if e.is_transport() || matches!(e, IngestError::Write(_)) { EXIT_RUNTIME } else { EXIT_DATA };
        Self { code, error: e.into() }
    }
}
