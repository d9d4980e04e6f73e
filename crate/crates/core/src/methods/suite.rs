use serde::Serialize;

use super::metrics::{combine_scenarios, ViolationMetrics};
use super::report::{HcReport, MethodId};
use super::run::{run_method, MethodConfig};
use super::MethodError;
use crate::cia::Direction;
use crate::feeder::{apply_scenario, Feeder, Scenario};

/// One method over the three load scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSuite {
    pub method: MethodId,
    pub runs: Vec<(Scenario, HcReport)>,
}

impl ScenarioSuite {
    /// Combined metrics of one direction: `W_M`, `VUF` averaged, `N_v`,
    /// `S_v` summed. `None` if any scenario lacks validated metrics.
    pub fn metrics(&self, d: Direction) -> Option<ViolationMetrics> {
        let runs: Option<Vec<ViolationMetrics>> = self.runs.iter().map(|(_, r)| r.direction(d).and_then(|x| x.metrics)).collect();
        runs.map(|m| combine_scenarios(&m))
    }

    /// Mean hosting capacity of one direction, `None` if any scenario is NA.
    pub fn mean_hc(&self, d: Direction) -> Option<f64> {
        let hc: Option<Vec<f64>> = self.runs.iter().map(|(_, r)| r.direction(d).and_then(|x| x.hc_mw)).collect();
        hc.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn run_scenarios(feeder: &Feeder, method: MethodId, cfg: &MethodConfig) -> Result<ScenarioSuite, MethodError> {
    let mut runs = Vec::new();
    for s in Scenario::ALL {
        let f = apply_scenario(feeder, s)?;
        runs.push((s, run_method(&f, method, cfg)?));
    }
    Ok(ScenarioSuite { method, runs })
}
