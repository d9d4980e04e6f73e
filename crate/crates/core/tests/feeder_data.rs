use std::path::PathBuf;

use hostcap::feeder::ieee37::{ieee37_with, Ieee37Options};
use hostcap::feeder::{generate_synthetic_feeder, parse_feeder, read_feeder, serialize_feeder};
use hostcap::loadflow::{solve_three_phase, LoadFlowOptions};
use hostcap::Feeder;
use num_complex::Complex64;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn assert_close(a: &Feeder, b: &Feeder) {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.slack_bus(), b.slack_bus());
    assert!((a.slack_voltage() - b.slack_voltage()).abs() < 1e-12);
    for (x, y) in a.buses().iter().zip(b.buses()) {
        assert_eq!((x.id, x.phases), (y.id, y.phases));
        for k in 0..3 {
            assert!((x.load[k] - y.load[k]).norm() < 1e-12);
        }
        assert_eq!(x.s_max.is_some(), y.s_max.is_some());
        if let (Some(s), Some(t)) = (x.s_max, y.s_max) {
            assert!((s - t).abs() < 1e-12);
        }
    }
    for (x, y) in a.branches().iter().zip(b.branches()) {
        assert_eq!((x.from, x.to), (y.from, y.to));
        for i in 0..3 {
            for j in 0..3 {
                assert!((x.z.0[i][j] - y.z.0[i][j]).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn bundled_ieee37_matches_the_builder() {
    let file = read_feeder(bundled("ieee37.json")).unwrap();
    assert_close(&file, &ieee37_with(Ieee37Options::default()));
}

#[test]
fn bundled_ieee37_base_case_converges_within_limits() {
    let f = read_feeder(bundled("ieee37.json")).unwrap();
    let r = solve_three_phase(&f, &vec![[Complex64::default(); 3]; f.len()], &LoadFlowOptions::default()).unwrap();
    assert!(r.converged);
    for (_, _, v) in r.voltages.entries() {
        assert!((0.95..=1.05).contains(&v), "{v}");
    }
}

#[test]
fn synthetic_feeders_round_trip_through_json() {
    for (n, seed) in [(2, 7), (37, 1), (200, 3)] {
        let f = generate_synthetic_feeder(n, seed, 0.2).unwrap();
        let text = serialize_feeder(&f);
        let back = parse_feeder(&text).unwrap();
        assert_close(&f, &back);
        assert_eq!(serialize_feeder(&back), text);
    }
}
