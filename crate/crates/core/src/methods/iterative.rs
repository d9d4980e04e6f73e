use std::time::Instant;

use super::report::{DirectionReport, HcReport, IterativeBounds, MethodId, RunStatus};
use super::run::{
    assemble_report, check_base_case, direction_report, evaluate, per_phase_plan, uniform_bounds, BoundUpdate,
    Evaluation, MethodConfig, PhaseBounds,
};
use super::MethodError;
use crate::cia::Direction;
use crate::feeder::{Feeder, ImpedanceMode};
use crate::loadflow::estimate_phase_voltages;
use crate::phase::Phase;

fn violates_limits(feeder: &Feeder, eval: &Evaluation, cfg: &MethodConfig) -> bool {
    match &eval.validation {
        Some(v) => {
            !v.result.converged
                || v.result.voltages.entries().any(|(_, _, mag)| {
                    mag < cfg.limits.min - cfg.validation_tolerance || mag > cfg.limits.max + cfg.validation_tolerance
                })
        }
        None => feeder.is_empty(),
    }
}

fn bounds_report(feeder: &Feeder, bounds: &PhaseBounds) -> IterativeBounds {
    let n = feeder.len();
    let pick = |lower: bool| {
        (0..n)
            .map(|node| {
                Phase::ALL.map(|p| {
                    let (lo, hi) = &bounds[p.index()];
                    if lower {
                        lo[node]
                    } else {
                        hi[node]
                    }
                })
            })
            .collect()
    };
    IterativeBounds {
        v_min: pick(true),
        v_max: pick(false),
    }
}

fn run_direction(
    feeder: &Feeder,
    alpha: f64,
    max_iter: usize,
    direction: Direction,
    cfg: &MethodConfig,
) -> Result<DirectionReport, MethodError> {
    let plan = per_phase_plan(feeder, ImpedanceMode::Diagonal)?;
    let mut bounds = uniform_bounds(feeder, cfg.limits);
    let mut accepted: Option<(Evaluation, PhaseBounds)> = None;
    let mut count = 0;

    for iter in 0..max_iter {
        let eval = evaluate(feeder, &plan, &bounds, direction, cfg)?;
        if eval.status != RunStatus::Feasible {
            if iter == 0 {
                return Err(MethodError::InfeasibleStart(direction));
            }
            break;
        }
        if violates_limits(feeder, &eval, cfg) {
            if accepted.is_none() {
                accepted = Some((eval, bounds.clone()));
                count = 1;
            }
            break;
        }
        let v = &eval.validation.as_ref().unwrap().result;
        let estimate = estimate_phase_voltages(feeder, &v.currents);
        let mut next = bounds.clone();
        for node in 0..feeder.len() {
            for p in Phase::ALL {
                if !feeder.buses()[node].has_phase(p) || node == feeder.slack() {
                    continue;
                }
                let dv = estimate.magnitude(node, p) - eval.predicted[node][p.index()];
                let (lo, hi) = &mut next[p.index()];
                match cfg.bound_update {
                    BoundUpdate::Shift => {
                        hi[node] -= alpha * dv;
                        lo[node] -= alpha * dv;
                    }
                    BoundUpdate::Symmetric => {
                        hi[node] += alpha * dv;
                        lo[node] -= alpha * dv;
                    }
                }
                // keep a non-empty interval for the optimizer
                if lo[node] >= hi[node] {
                    let mid = 0.5 * (lo[node] + hi[node]);
                    lo[node] = mid - 1e-6;
                    hi[node] = mid + 1e-6;
                }
            }
        }
        accepted = Some((eval, bounds));
        count = iter + 1;
        bounds = next;
    }

    let (eval, used) = accepted.expect("first iteration is always recorded");
    let mut report = direction_report(feeder, &eval, direction, cfg);
    report.iterations = Some(count);
    report.bounds = Some(bounds_report(feeder, &used));
    Ok(report)
}

/// Iterative voltage-bound method: repeatedly solve the per-phase programs,
/// compare per-phase load-flow voltages with the three-phase ones, and move
/// each phase's per-bus bounds by `α·ΔV`. Stops before the first iterate
/// whose three-phase voltages leave the physical limits, after `max_iter`
/// iterations, or when a re-solve becomes infeasible.
pub fn run_iterative(feeder: &Feeder, alpha: f64, max_iter: usize, cfg: &MethodConfig) -> Result<HcReport, MethodError> {
    let start = Instant::now();
    let method = MethodId::Iterative { alpha, max_iter };
    method.validate().map_err(MethodError::InvalidParameter)?;
    check_base_case(feeder, cfg)?;
    let mut directions = Vec::new();
    for &d in &cfg.directions {
        directions.push(run_direction(feeder, alpha, max_iter, d, cfg)?);
    }
    Ok(assemble_report(feeder, method, directions, start))
}
