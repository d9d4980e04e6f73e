use std::time::Instant;

use super::report::{HcReport, MethodId};
use super::run::{
    assemble_report, check_base_case, direction_report, evaluate, per_phase_plan, phase_is_used, uniform_bounds,
    Evaluation, MethodConfig, Plan,
};
use super::MethodError;
use crate::feeder::{extract_phase_selective, Feeder, ImpedanceMode};
use crate::phase::Phase;

/// Buses whose per-phase prediction misses the three-phase voltage by more
/// than `epsilon` on any phase.
fn mismatched_buses(feeder: &Feeder, eval: &Evaluation, epsilon: f64) -> Vec<bool> {
    let Some(v) = &eval.validation else {
        return vec![false; feeder.len()];
    };
    (0..feeder.len())
        .map(|node| {
            Phase::ALL.into_iter().any(|p| {
                feeder.buses()[node].has_phase(p)
                    && (v.result.voltages.magnitude(node, p) - eval.predicted[node][p.index()]).abs() > epsilon
            })
        })
        .collect()
}

/// Branches with either end at a selected bus, indexed like the branch list.
fn incident_branches(feeder: &Feeder, selected: &[bool]) -> Vec<bool> {
    feeder
        .branches()
        .iter()
        .map(|b| {
            let from = feeder.index_of(b.from).unwrap();
            let to = feeder.index_of(b.to).unwrap();
            selected[from] || selected[to]
        })
        .collect()
}

fn selective_plan(feeder: &Feeder, modified: &[bool]) -> Result<Plan, MethodError> {
    let mut list = Vec::new();
    for p in Phase::ALL {
        let sp = extract_phase_selective(feeder, p, ImpedanceMode::Theorem1Approx, modified)?;
        if phase_is_used(&sp) {
            list.push((p, sp));
        }
    }
    Ok(Plan::PerPhase(list))
}

/// Mod-Z(ε): solve with every line mutual-compensated, flag buses where the
/// per-phase and three-phase voltages differ by more than `epsilon`, then
/// re-solve compensating only the lines touching flagged buses. Each
/// direction selects its own lines.
pub fn run_modz(feeder: &Feeder, epsilon: f64, cfg: &MethodConfig) -> Result<HcReport, MethodError> {
    let start = Instant::now();
    let method = MethodId::ModZ { epsilon };
    method.validate().map_err(MethodError::InvalidParameter)?;
    check_base_case(feeder, cfg)?;
    let bounds = uniform_bounds(feeder, cfg.limits);
    let all_modified = per_phase_plan(feeder, ImpedanceMode::Theorem1Approx)?;

    let mut directions = Vec::new();
    for &d in &cfg.directions {
        let mut eval = evaluate(feeder, &all_modified, &bounds, d, cfg)?;
        let mut modified = vec![true; feeder.branches().len()];
        for _ in 0..cfg.modz_passes.max(1) {
            let selected = mismatched_buses(feeder, &eval, epsilon);
            modified = incident_branches(feeder, &selected);
            eval = evaluate(feeder, &selective_plan(feeder, &modified)?, &bounds, d, cfg)?;
        }
        let mut report = direction_report(feeder, &eval, d, cfg);
        report.modified_lines = Some(
            feeder
                .branches()
                .iter()
                .zip(&modified)
                .filter(|(_, m)| **m)
                .map(|(b, _)| [b.from, b.to])
                .collect(),
        );
        directions.push(report);
    }
    Ok(assemble_report(feeder, method, directions, start))
}

/// ε values tried by [`run_modz_calibrated`], ending with ∞ (Method 2ii).
pub const EPSILON_LADDER: [f64; 6] = [0.001, 0.002, 0.003, 0.005, 0.01, f64::INFINITY];

/// Mod-Z with ε calibrated by simulation: the first value of `ladder` whose
/// validated result has no voltage violation in any direction. Returns that
/// ε with its report, or the last rung's if none is clean.
pub fn run_modz_calibrated(feeder: &Feeder, ladder: &[f64], cfg: &MethodConfig) -> Result<(f64, HcReport), MethodError> {
    let mut last = None;
    for &epsilon in ladder {
        let report = run_modz(feeder, epsilon, cfg)?;
        if report.is_clean() {
            return Ok((epsilon, report));
        }
        last = Some((epsilon, report));
    }
    last.ok_or_else(|| MethodError::InvalidParameter("empty ε ladder".into()))
}
