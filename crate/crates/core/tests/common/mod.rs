//! Independent oracles shared by the sensitivity tests and the acceptance run.
#![allow(dead_code)]

use hostcap::feeder::ieee37::{ieee37_with, Ieee37Options};
use hostcap::feeder::{extract_phase, generate_synthetic_feeder, ImpedanceMode};
use hostcap::loadflow::{solve_single_phase, LoadFlowOptions};
use hostcap::sensitivity::{
    build_sensitivity_matrices, build_taylor_point, eval_f_aff, eval_f_quad, BranchTaylor, ProxyDeviation,
};
use hostcap::{Phase, SinglePhaseFeeder};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ancestors_inclusive(sp: &SinglePhaseFeeder, node: usize) -> Vec<usize> {
    let mut out = vec![node];
    let mut cur = node;
    while let Some(p) = sp.topology.parent(cur) {
        out.push(p);
        cur = p;
    }
    out
}

/// Path summation: walk the branches from the root down to `j` and add the
/// contribution of every branch that also carries the flow of `k`.
pub fn brute_force(sp: &SinglePhaseFeeder, j: usize, k: usize) -> (f64, f64, f64) {
    let root = sp.topology.root();
    let mut path = ancestors_inclusive(sp, j);
    path.retain(|&b| b != root);
    path.reverse();
    let k_path = ancestors_inclusive(sp, k);
    let (rk, xk) = (sp.r(k), sp.x(k));
    let (mut mp, mut mq, mut h) = (0.0, 0.0, 0.0);
    for b in path {
        let (rb, xb) = (sp.r(b), sp.x(b));
        if k_path.contains(&b) {
            mp += 2.0 * rb;
            mq += 2.0 * xb;
            h += 2.0 * (rb * rk + xb * xk);
        }
        if b == k {
            h -= rk * rk + xk * xk;
        }
    }
    (mp, mq, h)
}

pub fn synthetic_phase(n: usize, seed: u64, phase: Phase) -> SinglePhaseFeeder {
    let f = generate_synthetic_feeder(n, seed, 0.3).unwrap();
    extract_phase(&f, phase, ImpedanceMode::Diagonal).unwrap()
}

/// Compares every sensitivity matrix entry with the path-summation oracle.
pub fn check_matrices(sp: &SinglePhaseFeeder) -> Result<(), String> {
    let sm = build_sensitivity_matrices(sp);
    if sm.dim() != sp.len() - 1 {
        return Err(format!("dimension {} for {} buses", sm.dim(), sp.len()));
    }
    for (a, &j) in sm.nodes.iter().enumerate() {
        for (b, &k) in sm.nodes.iter().enumerate() {
            let (mp, mq, h) = brute_force(sp, j, k);
            let carries = ancestors_inclusive(sp, k).contains(&j);
            let expect = [
                ("M_p", sm.mp[(a, b)], mp),
                ("M_q", sm.mq[(a, b)], mq),
                ("H", sm.h[(a, b)], h),
                ("C", sm.c[(a, b)], if carries { -1.0 } else { 0.0 }),
                ("D_R", sm.dr[(a, b)], if carries { sp.r(k) } else { 0.0 }),
                ("D_X", sm.dx[(a, b)], if carries { sp.x(k) } else { 0.0 }),
                ("M_p symmetry", sm.mp[(a, b)], sm.mp[(b, a)]),
            ];
            for (name, got, want) in expect {
                if got != want {
                    return Err(format!("{name}[{j},{k}] = {got}, oracle {want}"));
                }
            }
        }
    }
    Ok(())
}

/// Largest residual of the linear substitution identities when fed the
/// squared currents of exact single-phase load flows on 20 random feeders.
pub fn substitution_residual() -> f64 {
    // the reference solution must be far tighter than the identity under test
    let opts = LoadFlowOptions { tolerance: 1e-13, max_iter: 500 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let n = rng.gen_range(5..80);
        let sp = synthetic_phase(n, seed, Phase::ALL[(seed % 3) as usize]);
        let inj: Vec<Complex64> = (0..sp.len())
            .map(|i| {
                if i == sp.slack() || !sp.active[i] {
                    Complex64::default()
                } else {
                    Complex64::new(rng.gen_range(-0.02..0.05), rng.gen_range(-0.02..0.02))
                }
            })
            .collect();
        let lf = solve_single_phase(&sp, &inj, &opts).unwrap();
        let sm = build_sensitivity_matrices(&sp);
        let net = |node: usize| inj[node] - sp.load[node];
        let p = DVector::from_iterator(sm.dim(), sm.nodes.iter().map(|&b| net(b).re));
        let q = DVector::from_iterator(sm.dim(), sm.nodes.iter().map(|&b| net(b).im));
        let l = DVector::from_iterator(sm.dim(), sm.nodes.iter().map(|&b| lf.currents[b].norm_sqr()));
        let v = sm.voltages(&p, &q, &l);
        let pf = sm.active_flows(&p, &l);
        let qf = sm.reactive_flows(&q, &l);
        for (a, &b) in sm.nodes.iter().enumerate() {
            worst = worst.max((v[a] - lf.voltages[b].norm_sqr()).abs());
            let parent = sp.topology.parent(b).unwrap();
            let s = lf.voltages[parent] * lf.currents[b].conj();
            worst = worst.max((pf[a] - s.re).abs()).max((qf[a] - s.im).abs());
        }
    }
    worst
}

/// Taylor points of every IEEE 37 branch plus a synthetic feeder carrying
/// reverse flow from a large injection at its last bus.
pub fn taylor_branches() -> Vec<BranchTaylor> {
    let feeder = ieee37_with(Ieee37Options::default());
    let opts = LoadFlowOptions::default();
    let mut branches = Vec::new();
    for phase in Phase::ALL {
        let sp = extract_phase(&feeder, phase, ImpedanceMode::Theorem1Approx).unwrap();
        let tp = build_taylor_point(&sp, &vec![Complex64::default(); sp.len()], &opts).unwrap();
        branches.extend(tp.branches);
    }
    let sp = synthetic_phase(40, 3, Phase::A);
    let mut inj = vec![Complex64::default(); sp.len()];
    inj[sp.len() - 1] = Complex64::new(0.3, 0.0);
    branches.extend(build_taylor_point(&sp, &inj, &opts).unwrap().branches);
    branches
}

/// Fraction of sampled points satisfying `f_aff ≤ l` and `l ≤ f_quad` on the
/// worst branch, for points drawn inside random proxy boxes of half-width at
/// most 0.2 pu around each branch's reference state.
pub fn sandwich_rates(branches: &[BranchTaylor], samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (1.0f64, 1.0f64);
    for t in branches {
        let r = [t.p0, t.q0, t.v0];
        let mut lower_ok = 0;
        let mut upper_ok = 0;
        for _ in 0..samples {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            let mut pt = [0.0; 3];
            for i in 0..3 {
                let a = rng.gen_range(-0.2..=0.2);
                let b = rng.gen_range(-0.2..=0.2);
                lo[i] = r[i] + f64::min(a, b);
                hi[i] = r[i] + f64::max(a, b);
                pt[i] = rng.gen_range(lo[i]..=hi[i]);
            }
            let d = ProxyDeviation::from_box(t, lo, hi);
            let l = (pt[0] * pt[0] + pt[1] * pt[1]) / pt[2];
            if eval_f_aff(t, &d) <= l + 1e-12 {
                lower_ok += 1;
            }
            if l <= eval_f_quad(t, &d).value + 1e-12 {
                upper_ok += 1;
            }
        }
        worst.0 = worst.0.min(lower_ok as f64 / samples as f64);
        worst.1 = worst.1.min(upper_ok as f64 / samples as f64);
    }
    worst
}
