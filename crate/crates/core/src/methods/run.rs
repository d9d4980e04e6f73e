use std::time::Instant;

use num_complex::Complex64;

use super::metrics::{compute_metrics_with_tolerance, VoltageLimits};
use super::report::{DirectionReport, FeederSummary, HcReport, MethodId, RunStatus};
use super::{iterative, modz, random, MethodError};
use crate::cia::{solve_phase, CiaConfig, CiaSolution, CiaStatus, ClarabelSolver, Direction, NodeValues};
use crate::feeder::{balance_approximation, extract_phase, BalanceVariant, Feeder, ImpedanceMode, SinglePhaseFeeder};
use crate::loadflow::{
    solve_single_phase, solve_three_phase, LoadFlowError, LoadFlowOptions, LoadFlowOutcome, LoadFlowResult,
};
use crate::phase::{PerPhase, Phase};

/// How the iterative method moves the per-phase voltage bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundUpdate {
    /// Shift both bounds by `−αΔV`, so the per-phase model absorbs the
    /// measured three-phase offset (`|V^3φ| ≈ |V^per| + ΔV`).
    Shift,
    /// `V̄ ← V̄ + αΔV`, `V̲ ← V̲ − αΔV`.
    Symmetric,
}

/// Settings shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    /// Optimizer settings; its voltage bounds and direction are set by the
    /// method from `limits` and `directions`.
    pub cia: CiaConfig,
    /// Physical voltage limits (magnitude pu).
    pub limits: VoltageLimits,
    pub directions: Vec<Direction>,
    pub bound_update: BoundUpdate,
    /// Selection/re-solve passes of Mod-Z.
    pub modz_passes: usize,
    /// Violations up to this size (pu) are not counted by validation.
    pub validation_tolerance: f64,
    pub loadflow: LoadFlowOptions,
    pub solver: ClarabelSolver,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            cia: CiaConfig::default(),
            limits: VoltageLimits::default(),
            directions: Direction::BOTH.to_vec(),
            bound_update: BoundUpdate::Shift,
            modz_passes: 1,
            validation_tolerance: 1e-6,
            loadflow: LoadFlowOptions::default(),
            solver: ClarabelSolver::default(),
        }
    }
}

/// Per-phase, per-bus voltage magnitude bounds.
pub(crate) type PhaseBounds = PerPhase<(Vec<f64>, Vec<f64>)>;

pub(crate) fn uniform_bounds(feeder: &Feeder, limits: VoltageLimits) -> PhaseBounds {
    let n = feeder.len();
    [0, 1, 2].map(|_| (vec![limits.min; n], vec![limits.max; n]))
}

/// Single-phase models solved by a method.
pub(crate) enum Plan {
    /// One model whose injections go to every present phase.
    Replicated(SinglePhaseFeeder),
    /// One model per phase.
    PerPhase(Vec<(Phase, SinglePhaseFeeder)>),
}

/// Three-phase validation of a set of injections.
pub(crate) struct Validation {
    pub result: LoadFlowResult,
}

pub(crate) struct Evaluation {
    pub status: RunStatus,
    pub solutions: Vec<(Option<Phase>, CiaSolution)>,
    /// DER injections per bus and phase (pu).
    pub injections: Vec<PerPhase<Complex64>>,
    pub predicted: Vec<PerPhase<f64>>,
    pub validation: Option<Validation>,
}

pub(crate) fn phase_is_used(sp: &SinglePhaseFeeder) -> bool {
    (0..sp.len()).any(|n| n != sp.slack() && sp.active[n])
}

/// Solves every model of `plan` in one direction and validates the
/// resulting injections on the three-phase feeder.
pub(crate) fn evaluate(
    feeder: &Feeder,
    plan: &Plan,
    bounds: &PhaseBounds,
    direction: Direction,
    cfg: &MethodConfig,
) -> Result<Evaluation, MethodError> {
    let n = feeder.len();
    let cia_for = |phase: Option<Phase>| {
        let (lo, hi) = match phase {
            Some(p) => (&bounds[p.index()].0, &bounds[p.index()].1),
            None => (&bounds[0].0, &bounds[0].1),
        };
        CiaConfig {
            v_min: NodeValues::PerNode(lo.clone()),
            v_max: NodeValues::PerNode(hi.clone()),
            direction,
            ..cfg.cia.clone()
        }
    };
    let models: Vec<(Option<Phase>, &SinglePhaseFeeder)> = match plan {
        Plan::Replicated(sp) => vec![(None, sp)],
        Plan::PerPhase(list) => list.iter().map(|(p, sp)| (Some(*p), sp)).collect(),
    };

    let mut solutions = Vec::with_capacity(models.len());
    for &(phase, sp) in &models {
        let sol = solve_phase(sp, &cia_for(phase), &cfg.solver)?;
        solutions.push((phase, sol));
    }
    let status = solutions
        .iter()
        .map(|(_, s)| match s.status {
            CiaStatus::Optimal => RunStatus::Feasible,
            CiaStatus::Infeasible => RunStatus::Infeasible,
            CiaStatus::SolverError => RunStatus::SolverError,
        })
        .max_by_key(|s| match s {
            RunStatus::Feasible => 0,
            RunStatus::Infeasible => 1,
            RunStatus::SolverError => 2,
        })
        .unwrap_or(RunStatus::Feasible);
    if status != RunStatus::Feasible {
        return Ok(Evaluation {
            status,
            solutions,
            injections: vec![[Complex64::default(); 3]; n],
            predicted: vec![[0.0; 3]; n],
            validation: None,
        });
    }

    let mut injections = vec![[Complex64::default(); 3]; n];
    let mut predicted = vec![[0.0; 3]; n];
    for (&(phase, sp), (_, sol)) in models.iter().zip(&solutions) {
        let inj = sol.injections();
        let single = solve_single_phase(sp, &inj, &cfg.loadflow).ok();
        let targets: Vec<Phase> = match phase {
            Some(p) => vec![p],
            None => Phase::ALL.to_vec(),
        };
        for node in 0..n {
            for &p in &targets {
                if feeder.buses()[node].has_phase(p) {
                    injections[node][p.index()] = inj[node];
                    predicted[node][p.index()] = single.as_ref().map_or(f64::NAN, |r| r.voltages[node].norm());
                }
            }
        }
    }
    let validation = Some(validate(feeder, &injections, &cfg.loadflow)?);
    Ok(Evaluation {
        status,
        solutions,
        injections,
        predicted,
        validation,
    })
}

/// Three-phase load flow with the injections on top of the loads; a
/// non-converged solve yields its last iterate.
pub(crate) fn validate(
    feeder: &Feeder,
    injections: &[PerPhase<Complex64>],
    opts: &LoadFlowOptions,
) -> Result<Validation, MethodError> {
    match solve_three_phase(feeder, injections, opts) {
        Ok(result) => Ok(Validation { result }),
        Err(LoadFlowError::NonConvergence { last, .. }) => match *last {
            LoadFlowOutcome::ThreePhase(result) => Ok(Validation { result }),
            LoadFlowOutcome::SinglePhase(_) => unreachable!("three-phase solve returned a single-phase iterate"),
        },
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn direction_report(feeder: &Feeder, eval: &Evaluation, direction: Direction, cfg: &MethodConfig) -> DirectionReport {
    let base = feeder.phase_base_mw();
    let injections_mw: Vec<PerPhase<f64>> = eval.injections.iter().map(|s| s.map(|x| x.re * base)).collect();
    let mut phase_totals_mw = [0.0; 3];
    for row in &injections_mw {
        for k in 0..3 {
            phase_totals_mw[k] += row[k];
        }
    }
    let feasible = eval.status == RunStatus::Feasible;
    let (metrics, converged, voltages) = match &eval.validation {
        Some(v) => (
            Some(compute_metrics_with_tolerance(&v.result.voltages, cfg.limits, cfg.validation_tolerance)),
            v.result.converged,
            v.result.voltages.magnitudes(),
        ),
        None => (None, false, vec![[0.0; 3]; feeder.len()]),
    };
    DirectionReport {
        direction,
        status: eval.status,
        hc_mw: feasible.then(|| phase_totals_mw.iter().sum()),
        phase_totals_mw,
        injections_mw,
        metrics,
        validation_converged: converged,
        voltages,
        predicted: eval.predicted.clone(),
        note: (!feasible).then(|| {
            eval.solutions
                .iter()
                .filter(|(_, s)| !s.is_optimal())
                .map(|(p, s)| {
                    let phase = p.map_or("balanced".to_string(), |p| format!("phase {p}"));
                    format!("{phase}: {:?} ({})", s.status, s.stats.solver_status)
                })
                .collect::<Vec<_>>()
                .join("; ")
        }),
        modified_lines: None,
        iterations: None,
        bounds: None,
    }
}

pub(crate) fn assemble_report(feeder: &Feeder, method: MethodId, directions: Vec<DirectionReport>, start: Instant) -> HcReport {
    let mut report = HcReport {
        method,
        feeder: FeederSummary::of(feeder),
        bus_ids: feeder.buses().iter().map(|b| b.id).collect(),
        hc_lower_mw: None,
        hc_upper_mw: None,
        up: None,
        down: None,
        runtime_seconds: 0.0,
    };
    for d in directions {
        match d.direction {
            Direction::Maximize => {
                report.hc_upper_mw = d.hc_mw;
                report.up = Some(d);
            }
            Direction::Minimize => {
                report.hc_lower_mw = d.hc_mw;
                report.down = Some(d);
            }
        }
    }
    report.runtime_seconds = start.elapsed().as_secs_f64();
    report
}

/// Per-phase models with the given impedance treatment; phases without any
/// bus are skipped.
pub(crate) fn per_phase_plan(feeder: &Feeder, mode: ImpedanceMode) -> Result<Plan, MethodError> {
    let mut list = Vec::new();
    for p in Phase::ALL {
        let sp = extract_phase(feeder, p, mode)?;
        if phase_is_used(&sp) {
            list.push((p, sp));
        }
    }
    Ok(Plan::PerPhase(list))
}

pub(crate) fn check_base_case(feeder: &Feeder, cfg: &MethodConfig) -> Result<(), MethodError> {
    let n = feeder.len();
    solve_three_phase(feeder, &vec![[Complex64::default(); 3]; n], &cfg.loadflow)?;
    Ok(())
}

/// Runs `method` in every configured direction and validates the result on
/// the full three-phase feeder.
pub fn run_method(feeder: &Feeder, method: MethodId, cfg: &MethodConfig) -> Result<HcReport, MethodError> {
    method.validate().map_err(MethodError::InvalidParameter)?;
    match method {
        MethodId::ModZ { epsilon } => return modz::run_modz(feeder, epsilon, cfg),
        MethodId::Iterative { alpha, max_iter } => return iterative::run_iterative(feeder, alpha, max_iter, cfg),
        MethodId::RandomSearch { samples, seed } => return random::run_random_search(feeder, samples, seed, cfg),
        _ => {}
    }
    let start = Instant::now();
    check_base_case(feeder, cfg)?;
    let plan = match method {
        MethodId::M1i => Plan::Replicated(balance_approximation(feeder, BalanceVariant::WorstCase)?),
        MethodId::M1ii => Plan::Replicated(balance_approximation(feeder, BalanceVariant::Average)?),
        MethodId::M2i { phase } => Plan::Replicated(extract_phase(feeder, phase, ImpedanceMode::Diagonal)?),
        _ => per_phase_plan(feeder, ImpedanceMode::Diagonal)?,
    };
    let bounds = uniform_bounds(feeder, cfg.limits);
    let mut directions = Vec::new();
    for &d in &cfg.directions {
        let eval = evaluate(feeder, &plan, &bounds, d, cfg)?;
        directions.push(direction_report(feeder, &eval, d, cfg));
    }
    Ok(assemble_report(feeder, method, directions, start))
}
