use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use super::assemble::{assemble_problem, CiaProblem};
use super::config::{CiaConfig, Direction};
use super::problem::{Constraint, ConvexSolver, SolveStatus};
use super::CiaError;
use crate::feeder::SinglePhaseFeeder;
use crate::loadflow::LoadFlowOptions;
use crate::sensitivity::{build_sensitivity_matrices, build_taylor_point, SensitivityMatrices};

/// Largest accepted mismatch between the solver's point and an independent
/// re-evaluation of the constraints, relative to the largest variable
/// magnitude (at least 1).
pub const RESIDUAL_TOLERANCE: f64 = 1e-7;
/// Constraints closer than this to their bound are reported as active.
pub const ACTIVE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CiaStatus {
    Optimal,
    Infeasible,
    SolverError,
}

/// Proxy values per bus; flow and current entries belong to the branch
/// feeding the bus (zero at the slack).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProxyValues {
    pub v_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub l_plus: Vec<f64>,
    pub l_minus: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: u32,
    #[serde(skip)]
    pub seconds: f64,
    /// Largest constraint residual found by the independent check, relative
    /// to the largest variable magnitude (at least 1).
    pub residual: f64,
    pub solver_status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiaSolution {
    pub direction: Direction,
    pub status: CiaStatus,
    pub bus_ids: Vec<u32>,
    /// DER active injection per bus (pu, per-phase base).
    pub p_star: Vec<f64>,
    pub q_star: Vec<f64>,
    pub proxies: ProxyValues,
    /// `Σ pᵢ` in MW.
    pub hc_total_mw: f64,
    pub phase_base_mw: f64,
    pub stats: SolveStats,
    pub active_constraints: Vec<String>,
}

impl CiaSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == CiaStatus::Optimal
    }

    /// Injections as complex power, ready for a load flow.
    pub fn injections(&self) -> Vec<Complex64> {
        self.p_star.iter().zip(&self.q_star).map(|(&p, &q)| Complex64::new(p, q)).collect()
    }

    pub fn p_mw(&self) -> Vec<f64> {
        self.p_star.iter().map(|p| p * self.phase_base_mw).collect()
    }

    fn empty(cp: &CiaProblem, sp: &SinglePhaseFeeder, status: CiaStatus, stats: SolveStats) -> Self {
        let n = sp.len();
        CiaSolution {
            direction: cp.direction,
            status,
            bus_ids: sp.bus_ids.clone(),
            p_star: vec![0.0; n],
            q_star: vec![0.0; n],
            proxies: ProxyValues::default(),
            hc_total_mw: 0.0,
            phase_base_mw: sp.phase_base_mw,
            stats,
            active_constraints: Vec::new(),
        }
    }
}

/// Solves an assembled program and checks the optimum independently: every
/// constraint is re-evaluated, and the proxy values are recomputed from the
/// sensitivity matrices (`V± = V0² + M_p p + M_q q − H l∓`,
/// `P± = C p + D_R l±`, `Q± = C q + D_X l±`).
pub fn solve_hc_direction(
    cp: &CiaProblem,
    sp: &SinglePhaseFeeder,
    sm: &SensitivityMatrices,
    solver: &dyn ConvexSolver,
) -> CiaSolution {
    let out = solver.solve(&cp.problem);
    let mut stats = SolveStats {
        iterations: out.iterations,
        seconds: out.seconds,
        residual: 0.0,
        solver_status: out.detail.clone(),
    };
    match out.status {
        SolveStatus::Infeasible => return CiaSolution::empty(cp, sp, CiaStatus::Infeasible, stats),
        SolveStatus::Failed => return CiaSolution::empty(cp, sp, CiaStatus::SolverError, stats),
        SolveStatus::Optimal => {}
    }
    let x = &out.x;
    let n = sp.len();
    let val = |i: Option<usize>| i.map(|i| x[i]).unwrap_or(0.0);
    let mut px = ProxyValues {
        v_plus: vec![cp.base_voltage; n],
        v_minus: vec![cp.base_voltage; n],
        p_plus: vec![0.0; n],
        p_minus: vec![0.0; n],
        q_plus: vec![0.0; n],
        q_minus: vec![0.0; n],
        l_plus: vec![0.0; n],
        l_minus: vec![0.0; n],
    };
    let mut p_star = vec![0.0; n];
    let mut q_star = vec![0.0; n];
    for node in 0..n {
        let Some(v) = cp.vars[node] else { continue };
        p_star[node] = val(v.p);
        q_star[node] = val(v.q);
        px.v_plus[node] = x[v.v_plus];
        px.v_minus[node] = x[v.v_minus];
        px.p_plus[node] = x[v.p_plus];
        px.p_minus[node] = x[v.p_minus];
        px.q_plus[node] = x[v.q_plus];
        px.q_minus[node] = x[v.q_minus];
        px.l_plus[node] = x[v.l_plus];
        px.l_minus[node] = x[v.l_minus];
    }

    let (violation, _) = cp.problem.max_violation(x);
    let gather = |f: &dyn Fn(usize) -> f64| DVector::from_iterator(sm.dim(), sm.nodes.iter().map(|&node| f(node)));
    let pn = gather(&|i| p_star[i] - sp.load[i].re);
    let qn = gather(&|i| q_star[i] - sp.load[i].im);
    let lp = gather(&|i| px.l_plus[i]);
    let lm = gather(&|i| px.l_minus[i]);
    let checks = [
        (sm.voltages(&pn, &qn, &lm), gather(&|i| px.v_plus[i])),
        (sm.voltages(&pn, &qn, &lp), gather(&|i| px.v_minus[i])),
        (sm.active_flows(&pn, &lp), gather(&|i| px.p_plus[i])),
        (sm.active_flows(&pn, &lm), gather(&|i| px.p_minus[i])),
        (sm.reactive_flows(&qn, &lp), gather(&|i| px.q_plus[i])),
        (sm.reactive_flows(&qn, &lm), gather(&|i| px.q_minus[i])),
    ];
    let mismatch = checks.iter().map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    let ordering = (0..n)
        .map(|i| (px.l_minus[i] - px.l_plus[i]).max(px.v_minus[i] - px.v_plus[i]))
        .fold(0.0, f64::max);
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    stats.residual = violation.max(mismatch).max(ordering) / scale;
    if !(stats.residual <= RESIDUAL_TOLERANCE) {
        stats.solver_status = format!("{} (residual {:.2e})", stats.solver_status, stats.residual);
        return CiaSolution::empty(cp, sp, CiaStatus::SolverError, stats);
    }

    let active_constraints = cp
        .problem
        .constraints
        .iter()
        .filter(|(_, c)| !matches!(c, Constraint::Eq(_)) && c.slack(x) <= ACTIVE_TOLERANCE)
        .map(|(name, _)| name.clone())
        .collect();
    let hc_total_mw = p_star.iter().sum::<f64>() * sp.phase_base_mw;
    CiaSolution {
        direction: cp.direction,
        status: CiaStatus::Optimal,
        bus_ids: sp.bus_ids.clone(),
        p_star,
        q_star,
        proxies: px,
        hc_total_mw,
        phase_base_mw: sp.phase_base_mw,
        stats,
        active_constraints,
    }
}

/// Builds matrices and the base-case Taylor point, assembles and solves.
pub fn solve_phase(sp: &SinglePhaseFeeder, cfg: &CiaConfig, solver: &dyn ConvexSolver) -> Result<CiaSolution, CiaError> {
    let sm = build_sensitivity_matrices(sp);
    let tp = build_taylor_point(sp, &vec![Complex64::default(); sp.len()], &LoadFlowOptions::default())
        .map_err(|e| CiaError::BaseCase(Box::new(e)))?;
    let cp = assemble_problem(sp, &sm, &tp, cfg)?;
    Ok(solve_hc_direction(&cp, sp, &sm, solver))
}

/// How per-phase totals combine into a three-phase hosting capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Independent per-phase solves, totals summed.
    SumPhases,
    /// One solve whose injections are copied to all three phases.
    Replicate,
}

/// Three-phase total in MW from per-phase solutions of one direction.
pub fn aggregate_total(solutions: &[CiaSolution], rule: Aggregation) -> Result<f64, CiaError> {
    if let Some(bad) = solutions.iter().find(|s| !s.is_optimal()) {
        return Err(CiaError::MixedStatus(bad.status));
    }
    let sum: f64 = solutions.iter().map(|s| s.hc_total_mw).sum();
    Ok(match rule {
        Aggregation::SumPhases => sum,
        Aggregation::Replicate => 3.0 * sum,
    })
}

/// `(HC̲, HC̄)` in MW.
pub fn hosting_capacity(down: &[CiaSolution], up: &[CiaSolution], rule: Aggregation) -> Result<(f64, f64), CiaError> {
    Ok((aggregate_total(down, rule)?, aggregate_total(up, rule)?))
}
