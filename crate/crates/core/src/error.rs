use crate::dataset::DatasetError;
use crate::eval::EvalError;
use crate::fusion::FusionError;
use crate::gbt::GbtError;

/// Any failure raised while running the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
