use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hostcap::feeder::{parse_feeder, read_feeder};
use hostcap::loadflow::{solve_three_phase, LoadFlowOptions};
use num_complex::Complex64;
use serde_json::Value;

fn ieee37() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ieee37.json")
}

fn hostcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hostcap")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn compute_2ii_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = ieee37();
    let out = hostcap(&["compute", "--feeder", path_str(&feeder), "--method", "2ii", "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("HC"), "{stdout}");

    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["injections.csv", "metadata.json", "report.json", "summary.csv", "voltage_profile.csv"]);

    let report = read_json(&dir.path().join("report.json"));
    let up = report["hc_upper_mw"].as_f64().unwrap();
    let down = report["hc_lower_mw"].as_f64().unwrap();
    assert!((up - 25.1).abs() <= 0.2 * 25.1, "{up}");
    assert!((down + 14.9).abs() <= 0.2 * 14.9, "{down}");
    assert_eq!(report["up"]["metrics"]["n_v"], 0);
    assert!(read_json(&dir.path().join("metadata.json"))["runtime_seconds"].is_number());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let feeder = ieee37();
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = hostcap(&["compute", "--feeder", path_str(&feeder), "--method", "modz", "--out", path_str(dir.path())]);
            assert_eq!(code(&out), 0);
            dir
        })
        .collect();
    for name in ["report.json", "summary.csv", "injections.csv", "voltage_profile.csv", "modified_lines.csv"] {
        let a = std::fs::read(runs[0].path().join(name)).unwrap();
        let b = std::fs::read(runs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn modz_reports_modified_lines() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = ieee37();
    let out = hostcap(&[
        "compute", "--feeder", path_str(&feeder), "--method", "modz", "--epsilon", "0.001", "--format", "json", "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let report = read_json(&dir.path().join("report.json"));
    for d in ["up", "down"] {
        let lines = report[d]["modified_lines"].as_array().unwrap();
        assert!(!lines.is_empty() && lines.len() <= 36, "{d}: {}", lines.len());
    }
    assert!(!dir.path().join("summary.csv").exists());
}

#[test]
fn calibrated_modz_reports_the_chosen_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = ieee37();
    let out = hostcap(&[
        "compute", "--feeder", path_str(&feeder), "--method", "modz", "--calibrate-epsilon", "--scenario", "iii",
        "--format", "json", "--out", path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let method = read_json(&dir.path().join("metadata.json"))["method"].as_str().unwrap().to_string();
    assert_ne!(method, "modz(0.001)");
    assert_eq!(read_json(&dir.path().join("report.json"))["down"]["metrics"]["n_v"], 0);

    let out = hostcap(&["compute", "--feeder", path_str(&feeder), "--method", "2ii", "--calibrate-epsilon", "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 1);
}

#[test]
fn iterative_writes_bound_data() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = ieee37();
    let out = hostcap(&[
        "compute", "--feeder", path_str(&feeder), "--method", "iterative", "--alpha", "0.5", "--max-iter", "10",
        "--direction", "up", "--format", "csv", "--out", path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bounds = std::fs::read_to_string(dir.path().join("iterative_bounds.csv")).unwrap();
    assert!(bounds.starts_with("direction,bus,phase,v_min_pu,v_max_pu"));
    assert!(bounds.lines().skip(1).all(|l| l.starts_with("up,")));
}

#[test]
fn bad_feeder_is_an_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"s_base_mva": 1, "v_base_kv": 4.16, "slack_bus": 1, "slack_voltage_pu": 1,
            "buses": [{"id": 1}, {"id": 2}],
            "branches": [{"from": 1, "to": 3, "z_ohm": [[[1,1],[0,0],[0,0]],[[0,0],[1,1],[0,0]],[[0,0],[0,0],[1,1]]]}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = hostcap(&["compute", "--feeder", path_str(&bad), "--method", "2ii", "--out", path_str(&out_dir)]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("schema error"), "{stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn infeasible_limits_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = ieee37();
    // the slack sits at 1.005 pu, above this upper limit
    let out = hostcap(&["compute", "--feeder", path_str(&feeder), "--vmax", "1.0", "--direction", "up", "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["up"]["status"], "infeasible");
    assert!(report["hc_upper_mw"].is_null());
}

#[test]
fn invalid_parameters_are_rejected_before_solving() {
    let feeder = ieee37();
    for args in [
        vec!["--method", "iterative", "--alpha", "2"],
        vec!["--method", "modz", "--epsilon", "-1"],
        vec!["--method", "nope"],
        vec!["--vmin", "1.1"],
        vec!["--smax-kva", "0"],
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut all = vec!["compute", "--feeder", path_str(&feeder), "--out", path_str(dir.path())];
        all.extend(args.iter());
        let out = hostcap(&all);
        assert_eq!(code(&out), 1, "{args:?}");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "{args:?}");
    }
}

#[test]
fn options_reach_the_optimizer() {
    let feeder = ieee37();
    let run = |extra: &[&str]| {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["compute", "--feeder", path_str(&feeder), "--direction", "up", "--format", "json"];
        args.extend(extra);
        args.extend(["--out", path_str(dir.path())]);
        assert_eq!(code(&hostcap(&args)), 0, "{extra:?}");
        read_json(&dir.path().join("report.json"))["hc_upper_mw"].as_f64().unwrap()
    };
    let base = run(&[]);
    assert!(run(&["--smax-kva", "500"]) < base);
    assert!(run(&["--vmax", "1.04"]) < base);
    assert_ne!(run(&["--scenario", "i"]), base);

    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.json");
    // unlisted buses keep weight 1; a heavy far-end bus trades total capacity
    std::fs::write(&weights, r#"{"741": 100.0}"#).unwrap();
    let far = run(&["--weights", path_str(&weights)]);
    assert!(far > 0.0 && far < base - 1e-6, "{far} vs {base}");
    let leaf = run(&["--weights", "leaf2x"]);
    assert!(leaf > 0.0);
}

#[test]
fn matrices_are_dumped_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = ieee37();
    let out = hostcap(&[
        "compute", "--feeder", path_str(&feeder), "--direction", "up", "--format", "json", "--dump-matrices", "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    for p in ["a", "b", "c"] {
        let text = std::fs::read_to_string(dir.path().join(format!("matrices_{p}.csv"))).unwrap();
        assert!(text.starts_with("matrix,row,col,value"));
        assert!(text.lines().any(|l| l.starts_with("H,")));
    }
}

#[test]
fn validate_zero_report_and_scaled_injections() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = ieee37();
    let zero = dir.path().join("zero.csv");
    std::fs::write(&zero, "bus,phase,p_mw\n701,a,0\n").unwrap();
    let out = hostcap(&["validate", "--feeder", path_str(&feeder), "--injections", path_str(&zero)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("N_v  0"));

    let run_dir = dir.path().join("run");
    assert_eq!(code(&hostcap(&["compute", "--feeder", path_str(&feeder), "--out", path_str(&run_dir)])), 0);
    let report = run_dir.join("report.json");
    for d in ["up", "down"] {
        let out = hostcap(&["validate", "--feeder", path_str(&feeder), "--injections", path_str(&report), "--direction", d]);
        assert_eq!(code(&out), 0, "{d}");
    }
    let csv = run_dir.join("injections.csv");
    let out = hostcap(&["validate", "--feeder", path_str(&feeder), "--injections", path_str(&csv), "--direction", "down"]);
    assert_eq!(code(&out), 0);

    let out = hostcap(&["validate", "--feeder", path_str(&feeder), "--injections", path_str(&report), "--scale", "10"]);
    assert_eq!(code(&out), 3);
    let out = hostcap(&[
        "validate", "--feeder", path_str(&feeder), "--injections", path_str(&report), "--direction", "down", "--scale", "10",
    ]);
    assert_eq!(code(&out), 1, "a diverging load flow is an error");
}

#[test]
fn generate_large_feeder_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f534.json");
    let out = hostcap(&["generate", "--buses", "534", "--seed", "1", "--unbalance", "0.2", "--out", path_str(&path)]);
    assert_eq!(code(&out), 0);
    let f = read_feeder(&path).unwrap();
    assert_eq!(f.len(), 534);
    let r = solve_three_phase(&f, &vec![[Complex64::default(); 3]; f.len()], &LoadFlowOptions::default()).unwrap();
    assert!(r.converged);
}

#[test]
fn generate_rejects_too_few_buses() {
    let out = hostcap(&["generate", "--buses", "1"]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
}

#[test]
fn generate_balanced_two_bus_feeder() {
    let out = hostcap(&["generate", "--buses", "2", "--seed", "7", "--unbalance", "0"]);
    assert_eq!(code(&out), 0);
    let f = parse_feeder(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(f.len(), 2);
    let load = f.buses()[1].load;
    assert!(load[0].norm() > 0.0);
    assert!((load[0] - load[1]).norm() < 1e-12 && (load[1] - load[2]).norm() < 1e-12);
}
