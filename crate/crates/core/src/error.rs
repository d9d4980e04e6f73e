use thiserror::Error;

use crate::cia::CiaError;
use crate::feeder::FeederError;
use crate::loadflow::LoadFlowError;
use crate::methods::MethodError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error wrapping the error of each stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Feeder(#[from] FeederError),
    #[error(transparent)]
    LoadFlow(#[from] LoadFlowError),
    #[error(transparent)]
    Cia(#[from] CiaError),
    #[error(transparent)]
    Method(#[from] MethodError),
}
