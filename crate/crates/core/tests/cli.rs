//! End-to-end runs of the `minitest` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minitest"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rate_of_a_dirac_is_one_over_n() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "dirac.json",
        r#"{"model":"multinomial","p":[0,0,1,0],"eta":0.1,"t":2.0}"#,
    );
    let v = json(&run(&["rate", "--spec", s(&spec), "--n", "100"]));
    assert_eq!(v["rate"]["total"].as_f64().unwrap(), 0.01);
    let meta = &v["metadata"];
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["seed"], 0);
    assert!(meta["constants"]["c_A4"].as_f64().unwrap() > 0.0);
    assert_eq!(meta["spec"]["p"][2], 1.0);
}

#[test]
fn indices_and_bounds_compare() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "u.json", r#"{"model":"multinomial","p":[0.25,0.25,0.25,0.25],"eta":0.2,"t":1.0}"#);
    let v = json(&run(&["indices", "--spec", s(&spec), "--n", "50"]));
    assert!(v["profile"]["I"].as_u64().unwrap() <= 3);
    let v = json(&run(&["bounds-compare", "--spec", s(&spec), "--n", "50", "--c-upper", "2", "--c-lower", "1"]));
    assert!(v["eps_plus"].as_f64().unwrap() >= v["eps_minus"].as_f64().unwrap());
    assert_eq!(v["bounds_match"], true);
}

#[test]
fn frobenius_rate_from_a_matrix() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.json", "[[0, 0.25], [0.25, 0]]");
    let v = json(&run(&["rate", "--matrix", s(&m), "--n", "4"]));
    assert!((v["frobenius_rate"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let bad = write(dir.path(), "bad.json", "[[0, 0.2], [0.3, 0]]");
    assert_eq!(run(&["rate", "--matrix", s(&bad), "--n", "4"]).status.code(), Some(1));
}

#[test]
fn sample_then_test_round_trip() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "b.json", r#"{"model":"binomial","p":[0.4,0.3,0.2,0.1,0.05],"eta":0.2,"t":1.0}"#);
    let data = dir.path().join("d.csv");
    let out = run(&["sample", "--spec", s(&spec), "--n", "200", "--seed", "7", "--out", s(&data)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("# {"));
    assert!(text.contains("\"seed\": 7"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 200);

    let v = json(&run(&["test", "--spec", s(&spec), "--data", s(&data), "--t2", "--frobenius"]));
    let verdict = &v["verdict"];
    for key in ["t_bulk", "t1", "thr_bulk", "thr_t1", "decide_aggregate", "profile"] {
        assert!(!verdict[key].is_null(), "{key}");
    }
    assert!(verdict["t2"].is_number());
    assert!(v["frobenius"]["threshold"].is_number());

    // Same draw as a histogram row.
    let hist = dir.path().join("h.csv");
    let out = run(&["sample", "--spec", s(&spec), "--n", "200", "--seed", "7", "--histogram", "--out", s(&hist)]);
    assert!(out.status.success());
    let h = std::fs::read_to_string(&hist).unwrap();
    assert!(h.lines().any(|l| l.starts_with("H,200,")));
    json(&run(&["test", "--spec", s(&spec), "--data", s(&hist)]));
}

#[test]
fn test_with_mismatched_dimensions_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"model":"binomial","p":[0.1,0.2,0.3],"eta":0.1,"t":1.0}"#);
    let data = write(dir.path(), "d.csv", "0,1\n1,0\n0,0\n");
    let out = run(&["test", "--spec", s(&spec), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_spec_names_the_invariant() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"model":"binomial","p":[0.1,1.3],"eta":0.1,"t":1.0}"#);
    let out = run(&["rate", "--spec", s(&spec), "--n", "10"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1.3"), "{err}");
    let spec = write(dir.path(), "t.json", r#"{"model":"poisson","p":[0.1],"eta":0.1,"t":3.0}"#);
    assert_eq!(run(&["rate", "--spec", s(&spec), "--n", "10"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["rate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--n", "10"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"model":"poisson","p":[0.3,0.2,0.1],"eta":0.1,"t":1.0}"#);
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(r#"{{"spec": "{}", "n": 50, "seed": 5}}"#, s(&spec)),
    );
    let v = json(&run(&["rate", "--config", s(&cfg)]));
    assert_eq!(v["metadata"]["params"]["n"], 50);
    assert_eq!(v["metadata"]["seed"], 5);
    let v = json(&run(&["rate", "--config", s(&cfg), "--n", "80", "--seed", "9"]));
    assert_eq!(v["metadata"]["params"]["n"], 80);
    assert_eq!(v["metadata"]["seed"], 9);
}

#[test]
fn adversary_emits_a_certificate() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"model":"binomial","p":[0.4,0.3,0.2,0.1],"eta":0.2,"t":1.5}"#);
    let v = json(&run(&["adversary", "--spec", s(&spec), "--n", "100", "--kind", "bulk", "--seed", "3"]));
    assert_eq!(v["draw"]["q"].as_array().unwrap().len(), 4);
    let c = &v["chi2_certificate"];
    assert!(c["closed_form"].as_f64().unwrap() <= c["limit"].as_f64().unwrap());
    let v = json(&run(&["adversary", "--spec", s(&spec), "--n", "100", "--kind", "single"]));
    assert!((v["draw"]["realized_separation"].as_f64().unwrap() - 0.008).abs() < 1e-12);
    assert_eq!(run(&["adversary", "--spec", s(&spec), "--n", "100", "--kind", "tail"]).status.code(), Some(1));
    assert_eq!(run(&["adversary", "--spec", s(&spec), "--n", "100", "--kind", "wide"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_csv_rows() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"model":"multinomial","p":[0.25,0.25,0.25,0.25],"eta":0.2,"t":1.0}"#);
    let out = run(&[
        "simulate", "--spec", s(&spec), "--n", "20,40", "--kind", "bulk", "--scale", "0,5", "--trials", "300",
        "--threads", "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "n,N,t,eta,kind,scale,trials,rate,ci_low,ci_high,seed");
    assert_eq!(body.len(), 5);
    assert!(body[1].starts_with("20,4,1.0,0.2,bulk,0.0,300,"));
    // Same seed, other thread count: identical table.
    let again = run(&[
        "simulate", "--spec", s(&spec), "--n", "20,40", "--kind", "bulk", "--scale", "0,5", "--trials", "300",
        "--threads", "1",
    ]);
    let again = String::from_utf8(again.stdout).unwrap();
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
    assert_eq!(strip(&text), strip(&again));
}

#[test]
fn radius_reports_a_separation() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"model":"binomial","p":[0.3,0.3,0.3,0.3,0.3,0.3],"eta":0.2,"t":2.0}"#);
    let v = json(&run(&[
        "radius", "--spec", s(&spec), "--n", "100", "--kind", "bulk", "--trials", "200", "--power-target", "0.5",
    ]));
    assert!(v["radius"]["separation"].as_f64().unwrap() > 0.0);
    assert!(v["ratio_to_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn poissonize_modes() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "m.json", r#"{"model":"multinomial","p":[0.5,0.3,0.2],"eta":0.2,"t":1.0}"#);
    let v = json(&run(&["poissonize", "--spec", s(&spec), "--n", "30", "--mode", "multinomial"]));
    assert_eq!(v["histogram"].as_array().unwrap().len(), 3);

    let bspec = write(dir.path(), "b.json", r#"{"model":"binomial","p":[0.5,0.3,0.2],"eta":0.2,"t":1.0}"#);
    let rows = dir.path().join("rows.csv");
    assert!(run(&["sample", "--spec", s(&bspec), "--n", "80", "--out", s(&rows)]).status.success());
    let out = run(&["poissonize", "--spec", s(&bspec), "--mode", "binomial-to-poisson", "--data", s(&rows)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let pspec = write(dir.path(), "p.json", r#"{"model":"poisson","p":[0.05,0.02],"eta":0.2,"t":1.0}"#);
    let counts = dir.path().join("counts.csv");
    assert!(run(&["sample", "--spec", s(&pspec), "--n", "60", "--out", s(&counts)]).status.success());
    let out = run(&["poissonize", "--spec", s(&pspec), "--mode", "poisson-to-bernoulli", "--data", s(&counts)]);
    // A failed reduction is reported as JSON with exit status 1.
    match out.status.code() {
        Some(0) => assert!(String::from_utf8_lossy(&out.stdout).starts_with("# {")),
        Some(1) => assert!(String::from_utf8_lossy(&out.stdout).contains("failure")),
        other => panic!("{other:?}"),
    }
    assert_eq!(run(&["poissonize", "--spec", s(&spec), "--n", "3", "--mode", "sideways"]).status.code(), Some(2));
}

#[test]
fn run_can_be_called_in_process() {
    assert_eq!(minitest::cli::run(["minitest", "rate"]), 2);
}
