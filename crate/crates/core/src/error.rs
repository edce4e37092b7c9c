use alloc::string::String;

use crate::chem::SmilesError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("version mismatch: {0}")]
    Version(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Smiles(#[from] SmilesError),
}

/// `format!` into an [`Error::Dimension`].
macro_rules! dim_err {
    ($($arg:tt)*) => { $crate::error::Error::Dimension(alloc::format!($($arg)*)) };
}

macro_rules! contract_err {
    ($($arg:tt)*) => { $crate::error::Error::Contract(alloc::format!($($arg)*)) };
}

pub(crate) use contract_err;
pub(crate) use dim_err;
