use thiserror::Error;

use crate::formulation::FormulationError;
use crate::instance::InstanceError;
use crate::lp::LpError;
use crate::metrics::MetricError;
use crate::oracle::OracleError;

/// Any failure surfaced by the solver entry points.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("LP failure at node {node}")]
    Lp { node: usize, source: LpError },
    #[error("{0}")]
    Internal(String),
}
