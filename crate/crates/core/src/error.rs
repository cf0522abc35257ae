use thiserror::Error;

use crate::format::ParseError;
use crate::graph::GraphError;
use crate::inference::InferenceError;
use crate::moments::MomentError;
use crate::online::LearnError;
use crate::oracle::OracleError;

/// Any error produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
