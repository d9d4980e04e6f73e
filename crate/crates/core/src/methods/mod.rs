//! End-to-end hosting-capacity methods and their evaluation.

mod iterative;
mod metrics;
mod modz;
mod random;
mod report;
mod run;
mod suite;

use thiserror::Error;

use crate::cia::{CiaError, Direction};
use crate::feeder::FeederError;
use crate::loadflow::LoadFlowError;

pub use iterative::run_iterative;
pub use metrics::{combine_scenarios, compute_metrics, compute_metrics_with_tolerance, ViolationMetrics, VoltageLimits};
pub use modz::{run_modz, run_modz_calibrated, EPSILON_LADDER};
pub use random::run_random_search;
pub use report::{BusPhaseValues, DirectionReport, FeederSummary, HcReport, IterativeBounds, MethodId, RunStatus};
pub use run::{run_method, BoundUpdate, MethodConfig};
pub use suite::{run_scenarios, ScenarioSuite};

#[derive(Debug, Error)]
pub enum MethodError {
    #[error(transparent)]
    Feeder(#[from] FeederError),
    #[error(transparent)]
    LoadFlow(#[from] LoadFlowError),
    #[error(transparent)]
    Cia(#[from] CiaError),
    #[error("invalid method parameter: {0}")]
    InvalidParameter(String),
    #[error("the first {} solve is infeasible", .0.as_str())]
    InfeasibleStart(Direction),
}
