use num_complex::Complex64;

use super::*;
use crate::feeder::{extract_phase, generate_synthetic_feeder, Branch, Bus, Feeder, ImpedanceMode, SinglePhaseFeeder};
use crate::loadflow::{solve_single_phase, LoadFlowOptions};
use crate::phase::{Phase, PhaseImpedance};
use crate::sensitivity::{build_sensitivity_matrices, build_taylor_point};

fn two_bus(load: Complex64, v0: f64) -> SinglePhaseFeeder {
    let f = Feeder::new(
        vec![Bus::new(0, [Complex64::default(); 3]), Bus::new(1, [load; 3])],
        vec![Branch {
            from: 0,
            to: 1,
            z: PhaseImpedance::diagonal([Complex64::new(0.01, 0.02); 3]),
        }],
        0,
        v0,
        3.0,
        1.0,
    )
    .unwrap();
    extract_phase(&f, Phase::A, ImpedanceMode::Diagonal).unwrap()
}

fn assemble(sp: &SinglePhaseFeeder, cfg: &CiaConfig) -> CiaProblem {
    let sm = build_sensitivity_matrices(sp);
    let tp = build_taylor_point(sp, &vec![Complex64::default(); sp.len()], &LoadFlowOptions::default()).unwrap();
    assemble_problem(sp, &sm, &tp, cfg).unwrap()
}

#[test]
fn two_bus_problem_dimensions() {
    let sp = two_bus(Complex64::new(0.1, 0.05), 1.0);
    let cfg = CiaConfig {
        l_min: Some(0.0),
        l_max: CurrentLimit::BaseCurrentMultiple(3.0),
        s_max_mva: None,
        ..CiaConfig::default()
    };
    let cp = assemble(&sp, &cfg);
    let s = cp.size;
    assert_eq!((s.injections, s.proxies, s.auxiliaries), (1, 8, 1));
    assert_eq!((s.abs_terms, s.quadratic_terms), (2, 8));
    assert_eq!(s.bounds, 4);
    assert_eq!(s.capacity, 0);
    assert_eq!(s.sign, 1);
    assert_eq!(cp.problem.num_vars(), 10);
}

#[test]
fn fixed_reactive_power_gives_linear_cap() {
    let sp = two_bus(Complex64::new(0.1, 0.05), 1.0);
    let cp = assemble(&sp, &CiaConfig::default());
    assert!(cp.vars[1].unwrap().q.is_none());
    assert_eq!(cp.size.capacity, 2);
    let free = assemble(
        &sp,
        &CiaConfig {
            q_mode: QMode::FreeWithinCone,
            ..CiaConfig::default()
        },
    );
    assert!(free.vars[1].unwrap().q.is_some());
    assert_eq!(free.size.capacity, 1);
}

#[test]
fn leaf_weights_mask_the_objective() {
    let f = generate_synthetic_feeder(12, 3, 0.1).unwrap();
    let sp = extract_phase(&f, Phase::A, ImpedanceMode::Diagonal).unwrap();
    let weights = Weights::PerBus((0..sp.len()).map(|n| (sp.bus_ids[n], if sp.topology.is_leaf(n) { 1.0 } else { 0.0 })).collect());
    let cp = assemble(&sp, &CiaConfig { weights, ..CiaConfig::default() });
    let touched: Vec<usize> = cp.problem.objective.terms.iter().map(|&(v, _)| v).collect();
    for node in 0..sp.len() {
        let Some(p) = cp.vars[node].and_then(|v| v.p) else { continue };
        assert_eq!(touched.contains(&p), sp.topology.is_leaf(node), "bus {}", sp.bus_ids[node]);
    }
}

#[test]
fn upper_bound_at_slack_voltage_pins_capacity_at_zero() {
    let sp = two_bus(Complex64::default(), 1.0);
    let cfg = CiaConfig {
        v_max: NodeValues::Uniform(1.0),
        s_max_mva: None,
        l_max: CurrentLimit::None,
        ..CiaConfig::default()
    };
    let sol = solve_phase(&sp, &cfg, &ClarabelSolver::default()).unwrap();
    assert_eq!(sol.status, CiaStatus::Optimal);
    assert!(sol.hc_total_mw.abs() < 1e-6, "{}", sol.hc_total_mw);
    assert!(sol.active_constraints.iter().any(|c| c == "bound:V+[1]"));
}

#[test]
fn violated_base_case_is_infeasible() {
    // even with the largest allowed injection (1.5 pu) the remaining load
    // pulls the voltage below 0.95
    let sp = two_bus(Complex64::new(4.0, 2.0), 1.0);
    let sol = solve_phase(&sp, &CiaConfig::default(), &ClarabelSolver::default()).unwrap();
    assert_eq!(sol.status, CiaStatus::Infeasible);
    assert!(aggregate_total(&[sol], Aggregation::SumPhases).is_err());
}

#[test]
fn matrix_and_recursive_forms_agree() {
    let f = generate_synthetic_feeder(15, 11, 0.2).unwrap();
    let sp = extract_phase(&f, Phase::B, ImpedanceMode::Diagonal).unwrap();
    for direction in Direction::BOTH {
        let base = CiaConfig::default().with_direction(direction);
        let rec = solve_phase(&sp, &base, &ClarabelSolver::default()).unwrap();
        let mat = solve_phase(
            &sp,
            &CiaConfig {
                form: ProxyForm::Matrix,
                ..base
            },
            &ClarabelSolver::default(),
        )
        .unwrap();
        assert!(rec.is_optimal() && mat.is_optimal());
        assert!((rec.hc_total_mw - mat.hc_total_mw).abs() < 1e-6 * rec.hc_total_mw.abs().max(1.0));
    }
}

#[test]
fn optimum_is_feasible_for_the_nonlinear_flow() {
    let f = generate_synthetic_feeder(30, 5, 0.2).unwrap();
    for phase in Phase::ALL {
        let sp = extract_phase(&f, phase, ImpedanceMode::Diagonal).unwrap();
        for direction in Direction::BOTH {
            let cfg = CiaConfig::default().with_direction(direction);
            let sol = solve_phase(&sp, &cfg, &ClarabelSolver::default()).unwrap();
            assert!(sol.is_optimal(), "{phase} {direction:?}: {:?}", sol.stats);
            assert!(sol.hc_total_mw * direction.sign() >= -1e-9);
            let lf = solve_single_phase(&sp, &sol.injections(), &LoadFlowOptions::default()).unwrap();
            for node in 0..sp.len() {
                let v = lf.voltages[node].norm();
                assert!(v >= 0.95 - 1e-6 && v <= 1.05 + 1e-6, "{phase} {direction:?} bus {} |V|={v}", sp.bus_ids[node]);
                let (vp, vm) = (sol.proxies.v_plus[node], sol.proxies.v_minus[node]);
                assert!(vm - 1e-6 <= v * v && v * v <= vp + 1e-6);
                if node != sp.slack() {
                    let l = lf.currents[node].norm_sqr();
                    assert!(sol.proxies.l_minus[node] - 1e-6 <= l && l <= sol.proxies.l_plus[node] + 1e-6);
                }
            }
        }
    }
}

fn fake(total: f64, status: CiaStatus) -> CiaSolution {
    CiaSolution {
        direction: Direction::Maximize,
        status,
        bus_ids: vec![0, 1],
        p_star: vec![0.0, total],
        q_star: vec![0.0; 2],
        proxies: ProxyValues::default(),
        hc_total_mw: total,
        phase_base_mw: 1.0,
        stats: SolveStats::default(),
        active_constraints: Vec::new(),
    }
}

#[test]
fn aggregation_rules() {
    let up = [8.0, 9.0, 8.1].map(|t| fake(t, CiaStatus::Optimal));
    assert!((aggregate_total(&up, Aggregation::SumPhases).unwrap() - 25.1).abs() < 1e-12);
    assert!((aggregate_total(&[fake(8.0, CiaStatus::Optimal)], Aggregation::Replicate).unwrap() - 24.0).abs() < 1e-12);
    let down = [-5.0, -4.9, -4.99].map(|t| fake(t, CiaStatus::Optimal));
    let (lo, hi) = hosting_capacity(&down, &up, Aggregation::SumPhases).unwrap();
    assert!((lo + 14.89).abs() < 1e-12 && (hi - 25.1).abs() < 1e-12);
    let mixed = [fake(1.0, CiaStatus::Optimal), fake(0.0, CiaStatus::SolverError)];
    assert!(matches!(aggregate_total(&mixed, Aggregation::SumPhases), Err(CiaError::MixedStatus(CiaStatus::SolverError))));
}
