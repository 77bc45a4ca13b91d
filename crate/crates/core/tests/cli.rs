use std::path::PathBuf;
use std::process::{Command, Output};

fn qprism(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qprism")).args(args).output().expect("run qprism")
}

fn qprism_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qprism")).args(args).env(key, val).output().expect("run qprism")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn identical_seed_identical_bytes() {
    for suite in ["complexes", "strat", "delta-axioms"] {
        let args = ["check", suite, "--seed", "7", "--instances", "6"];
        let a = qprism(&args);
        let b = qprism(&args);
        assert_eq!(a.status.code(), Some(0), "{suite}");
        assert_eq!(a.stdout, b.stdout, "{suite}");
    }
    let t = ["--format", "table", "qhiggs", "--input", &data("chart_rank2.json"), "--task", "complex"];
    assert_eq!(qprism(&t).stdout, qprism(&t).stdout);
}

#[test]
fn golden_outputs_match() {
    for (p, d, n) in [(2, 1, 1), (2, 2, 3), (3, 1, 2), (3, 2, 1)] {
        let out = qprism(&["envelope", "--p", &p.to_string(), "--prec", &n.to_string(), "--vars", &d.to_string()]);
        let want = std::fs::read(golden(&format!("envelope_p{p}_d{d}_n{n}.json"))).unwrap();
        assert_eq!(out.stdout, want, "envelope p={p} d={d} n={n}");
    }
    for (p, k) in [(2, 0), (2, 2), (3, 1), (3, 2)] {
        let out = qprism(&["pd", "--p", &p.to_string(), "--prec", "3", "--depth", &k.to_string()]);
        let want = std::fs::read(golden(&format!("pd_p{p}_k{k}.json"))).unwrap();
        assert_eq!(out.stdout, want, "pd p={p} k={k}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(qprism(&["check", "sigma"]).status.code(), Some(0));
    assert_eq!(qprism(&["check", "sigma", "--corrupt"]).status.code(), Some(1));
    assert_eq!(qprism(&["check", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(qprism(&["qhiggs", "--input", &data("chart_noncommuting.json"), "--task", "integrable"]).status.code(), Some(1));
    assert_eq!(qprism(&["qhiggs", "--input", &data("missing.json"), "--task", "integrable"]).status.code(), Some(2));
    assert_eq!(qprism(&["strat", "--module", &data("env_bad_epsilon.json"), "--task", "cocycle"]).status.code(), Some(1));
    assert_eq!(qprism(&["strat", "--module", &data("chart_rank2.json"), "--task", "build"]).status.code(), Some(2));
    assert_eq!(qprism(&["envelope", "--p", "4", "--prec", "1"]).status.code(), Some(2));
    assert_eq!(qprism(&["envelope", "--p", "2", "--prec", "1", "--vars", "2", "--wcap", "100000"]).status.code(), Some(3));
    assert_eq!(qprism_env(&["check", "envelope", "--p", "2"], "QPRISM_BUDGET", "3").status.code(), Some(3));
    assert_eq!(qprism(&["check"]).status.code(), Some(2));
}

#[test]
fn module_tasks() {
    for task in ["integrable", "complex", "tensor", "frobenius", "pullback"] {
        let out = qprism(&["qhiggs", "--input", &data("chart_rank2.json"), "--task", task]);
        assert_eq!(out.status.code(), Some(0), "{task}: {}", String::from_utf8_lossy(&out.stdout));
    }
    for task in ["build", "cocycle", "roundtrip", "frobenius", "ca-h0"] {
        let out = qprism(&["strat", "--module", &data("env_rank2.json"), "--task", task]);
        assert_eq!(out.status.code(), Some(0), "{task}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn cohomology_json_and_table() {
    let out = qprism(&["cohomology", "--input", &data("complex_z4.json")]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cohomology"][0]["factors"], serde_json::json!([1]));
    assert_eq!(v["cohomology"][1]["factors"], serde_json::json!([1]));
    let t = qprism(&["--format", "table", "cohomology", "--example", "affine-line", "--p", "2", "--prec", "1", "--deg", "4"]);
    let text = String::from_utf8_lossy(&t.stdout);
    assert!(text.lines().next().unwrap().starts_with("degree"));
    assert_eq!(text.lines().count(), 3);
}
