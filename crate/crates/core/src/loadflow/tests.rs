use num_complex::Complex64;

use super::*;
use crate::feeder::{extract_phase, Branch, Bus, Feeder, ImpedanceMode};
use crate::phase::PhaseImpedance;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 0 - 1 - 2, 1 - 3 with the given per-phase loads on buses 1..=3.
fn small_feeder(z: PhaseImpedance, loads: [[Complex64; 3]; 3]) -> Feeder {
    let mut buses = vec![Bus::new(0, [c(0.0, 0.0); 3])];
    for (k, l) in loads.into_iter().enumerate() {
        buses.push(Bus::new(k as u32 + 1, l));
    }
    let branches = [(0, 1), (1, 2), (1, 3)]
        .into_iter()
        .map(|(from, to)| Branch { from, to, z })
        .collect();
    Feeder::new(buses, branches, 0, 1.0, 1.0, 1.0).unwrap()
}

fn coupled_z() -> PhaseImpedance {
    let mut z = PhaseImpedance::diagonal([c(0.020, 0.040), c(0.022, 0.041), c(0.019, 0.038)]);
    for (i, j, m) in [(0, 1, c(0.006, 0.012)), (0, 2, c(0.005, 0.011)), (1, 2, c(0.007, 0.013))] {
        z.0[i][j] = m;
        z.0[j][i] = m;
    }
    z
}

fn unbalanced_loads() -> [[Complex64; 3]; 3] {
    [
        [c(0.30, 0.10), c(0.20, 0.05), c(0.45, 0.20)],
        [c(0.10, 0.02), c(0.25, 0.10), c(0.05, 0.01)],
        [c(0.20, 0.08), c(0.00, 0.00), c(0.15, 0.05)],
    ]
}

#[test]
fn zero_load_is_flat_in_one_iteration() {
    let f = small_feeder(coupled_z(), [[c(0.0, 0.0); 3]; 3]);
    let inj = vec![[c(0.0, 0.0); 3]; f.len()];
    let r = solve_three_phase(&f, &inj, &LoadFlowOptions::default()).unwrap();
    assert_eq!(r.iterations, 1);
    let slack = slack_phasors(1.0);
    for v in &r.voltages.phasors {
        assert_eq!(*v, slack);
    }
    assert!(r.currents.phasors.iter().all(|i| i.iter().all(|x| x.norm() == 0.0)));
}

#[test]
fn single_branch_matches_closed_form() {
    // |V1|⁴ + (2(rP + xQ) − V0²)|V1|² + |z|²|S|² = 0, larger root
    let (r, x, p, q, v0) = (0.01, 0.02, 1.0, 0.5, 1.0);
    let f = Feeder::new(
        vec![Bus::new(0, [c(0.0, 0.0); 3]), Bus::new(1, [c(p, q); 3])],
        vec![Branch {
            from: 0,
            to: 1,
            z: PhaseImpedance::diagonal([c(r, x); 3]),
        }],
        0,
        v0,
        1.0,
        1.0,
    )
    .unwrap();
    let sp = extract_phase(&f, Phase::A, ImpedanceMode::Diagonal).unwrap();
    let res = solve_single_phase(&sp, &[c(0.0, 0.0); 2], &LoadFlowOptions::default()).unwrap();
    let b = v0 * v0 - 2.0 * (r * p + x * q);
    let v1_sq = (b + (b * b - 4.0 * (r * r + x * x) * (p * p + q * q)).sqrt()) / 2.0;
    assert!((res.voltages[1].norm() - v1_sq.sqrt()).abs() < 1e-9);
}

#[test]
fn cancelling_injection_is_flat() {
    let f = small_feeder(coupled_z(), unbalanced_loads());
    let sp = extract_phase(&f, Phase::B, ImpedanceMode::Diagonal).unwrap();
    let inj = sp.load.clone();
    let res = solve_single_phase(&sp, &inj, &LoadFlowOptions::default()).unwrap();
    assert!(res.voltages.iter().all(|v| (v - c(1.0, 0.0)).norm() == 0.0));
    assert!(res.currents.iter().all(|i| i.norm() == 0.0));
}

#[test]
fn balanced_feeder_matches_single_phase() {
    let z = PhaseImpedance::diagonal([c(0.02, 0.05); 3]);
    let loads = [[c(0.3, 0.1); 3], [c(0.2, 0.05); 3], [c(0.1, 0.08); 3]];
    let f = small_feeder(z, loads);
    let inj = vec![[c(0.0, 0.0); 3]; f.len()];
    let r3 = solve_three_phase(&f, &inj, &LoadFlowOptions::default()).unwrap();
    let sp = extract_phase(&f, Phase::A, ImpedanceMode::Diagonal).unwrap();
    let r1 = solve_single_phase(&sp, &vec![c(0.0, 0.0); f.len()], &LoadFlowOptions::default()).unwrap();
    for node in 0..f.len() {
        for p in Phase::ALL {
            assert!((r3.voltages.magnitude(node, p) - r1.voltages[node].norm()).abs() < 1e-10);
        }
    }
}

#[test]
fn power_is_conserved() {
    let f = small_feeder(coupled_z(), unbalanced_loads());
    let mut inj = vec![[c(0.0, 0.0); 3]; f.len()];
    inj[2] = [c(0.4, 0.0), c(0.1, 0.0), c(0.0, 0.0)];
    let r = solve_three_phase(&f, &inj, &LoadFlowOptions::default()).unwrap();
    let mut expected = c(0.0, 0.0);
    for (node, bus) in f.buses().iter().enumerate() {
        for k in 0..3 {
            expected += bus.load[k] - inj[node][k];
        }
        if let Some(br) = f.parent_branch(node) {
            let i = r.currents.phasors[node];
            let drop = br.z.mul(&i);
            for k in 0..3 {
                expected += drop[k] * i[k].conj();
            }
        }
    }
    assert!((slack_power(&f, &r) - expected).norm() < 1e-8);
}

#[test]
fn kcl_holds_at_convergence() {
    let f = small_feeder(coupled_z(), unbalanced_loads());
    let inj = vec![[c(0.0, 0.0); 3]; f.len()];
    let r = solve_three_phase(&f, &inj, &LoadFlowOptions::default()).unwrap();
    let topo = f.topology();
    for node in 0..f.len() {
        if node == topo.root() {
            continue;
        }
        for k in 0..3 {
            let drawn = (f.buses()[node].load[k] / r.voltages.phasors[node][k]).conj();
            let out: Complex64 = topo.children(node).iter().map(|&ch| r.currents.phasors[ch][k]).sum();
            assert!((r.currents.phasors[node][k] - out - drawn).norm() < 1e-9);
        }
    }
}

#[test]
fn leaf_generation_does_not_lower_leaf_voltage() {
    let f = small_feeder(coupled_z(), unbalanced_loads());
    let base = solve_three_phase(&f, &vec![[c(0.0, 0.0); 3]; f.len()], &LoadFlowOptions::default()).unwrap();
    for step in [0.05, 0.1, 0.2] {
        let mut inj = vec![[c(0.0, 0.0); 3]; f.len()];
        inj[2] = [c(step, 0.0); 3];
        let r = solve_three_phase(&f, &inj, &LoadFlowOptions::default()).unwrap();
        for p in Phase::ALL {
            assert!(r.voltages.magnitude(2, p) >= base.voltages.magnitude(2, p));
        }
    }
}

#[test]
fn estimator_reproduces_sweep_voltages() {
    let f = small_feeder(coupled_z(), unbalanced_loads());
    let r = solve_three_phase(&f, &vec![[c(0.0, 0.0); 3]; f.len()], &LoadFlowOptions::default()).unwrap();
    let est = estimate_phase_voltages(&f, &r.currents);
    for node in 0..f.len() {
        for k in 0..3 {
            assert!((est.phasors[node][k] - r.voltages.phasors[node][k]).norm() < 1e-12);
        }
    }
    let zero = CurrentProfile3Ph {
        phasors: vec![[c(0.0, 0.0); 3]; f.len()],
    };
    let flat = estimate_phase_voltages(&f, &zero);
    assert!(flat.phasors.iter().all(|v| *v == slack_phasors(1.0)));
}

#[test]
fn estimator_without_mutuals_is_per_phase_propagation() {
    let z = PhaseImpedance::diagonal([c(0.02, 0.04), c(0.03, 0.05), c(0.01, 0.02)]);
    let f = small_feeder(z, unbalanced_loads());
    let r = solve_three_phase(&f, &vec![[c(0.0, 0.0); 3]; f.len()], &LoadFlowOptions::default()).unwrap();
    let est = estimate_phase_voltages(&f, &r.currents);
    let slack = slack_phasors(1.0);
    for k in 0..3 {
        let v1 = slack[k] - z.0[k][k] * r.currents.phasors[1][k];
        let v2 = v1 - z.0[k][k] * r.currents.phasors[2][k];
        assert!((est.phasors[2][k] - v2).norm() < 1e-15);
    }
}

#[test]
fn overload_reports_nonconvergence() {
    let f = small_feeder(coupled_z(), [[c(20.0, 10.0); 3]; 3]);
    let err = solve_three_phase(&f, &vec![[c(0.0, 0.0); 3]; f.len()], &LoadFlowOptions::default()).unwrap_err();
    match err {
        LoadFlowError::NonConvergence { last, .. } => {
            assert!(matches!(*last, LoadFlowOutcome::ThreePhase(ref r) if !r.converged))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn non_positive_slack_is_singular() {
    let f = small_feeder(coupled_z(), unbalanced_loads());
    let mut sp = extract_phase(&f, Phase::A, ImpedanceMode::Diagonal).unwrap();
    sp.slack_voltage = 0.0;
    let err = solve_single_phase(&sp, &vec![c(0.0, 0.0); f.len()], &LoadFlowOptions::default()).unwrap_err();
    assert!(matches!(err, LoadFlowError::SingularBase(_)));
}

#[test]
fn csv_rows_are_ordered() {
    let f = small_feeder(coupled_z(), unbalanced_loads());
    let r = solve_three_phase(&f, &vec![[c(0.0, 0.0); 3]; f.len()], &LoadFlowOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_voltage_csv(&mut buf, &f, &r).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "bus_id,phase,v_mag_pu,v_ang_deg");
    assert_eq!(lines.len(), 1 + 4 * 3);
    assert!(lines[1].starts_with("0,a,1.000000000000"));
    let mut buf = Vec::new();
    write_current_csv(&mut buf, &f, &r).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("0,1,a,"));
}
