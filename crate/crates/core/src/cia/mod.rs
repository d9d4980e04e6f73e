//! Convex inner approximation of the DistFlow feasible set and the
//! hosting-capacity programs built on it.

mod assemble;
mod config;
pub mod problem;
mod solve;

use thiserror::Error;

use crate::loadflow::LoadFlowError;

pub use assemble::{assemble_problem, CiaProblem, NodeVars, ProblemSize};
pub use config::{CiaConfig, CurrentLimit, Direction, NodeValues, ProxyForm, QMode, Weights};
pub use problem::{ClarabelSolver, ConvexProblem, ConvexSolver};
pub use solve::{
    aggregate_total, hosting_capacity, solve_hc_direction, solve_phase, Aggregation, CiaSolution, CiaStatus,
    ProxyValues, SolveStats, ACTIVE_TOLERANCE, RESIDUAL_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum CiaError {
    #[error("{what} do not match the feeder ({expected} buses)")]
    DimensionMismatch { what: &'static str, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("base-case load flow for the Taylor point failed: {0}")]
    BaseCase(Box<LoadFlowError>),
    #[error("cannot aggregate: a phase solve ended as {0:?}")]
    MixedStatus(CiaStatus),
}

#[cfg(test)]
mod tests;
