//! End-to-end runs of the `crra-eq` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crra-eq"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn single_agent(rho: f64, r: u32) -> String {
    format!(
        r#"{{"R": {r}, "sigma": 0.1, "alpha_star": 0.0, "delta0": 1.0,
            "agents": [{{"rho": {rho}, "alpha": 0.0, "gamma": 0.0}}]}}"#
    )
}

fn run(cmd: &mut Command) -> (i32, Value, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    let text = String::from_utf8(stdout).unwrap();
    let json = serde_json::from_str(text.trim()).unwrap_or(Value::Null);
    (status.code().unwrap(), json, String::from_utf8(stderr).unwrap())
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn validate_accepts_benchmark() {
    let (code, report, _) = run(exe().arg("validate").arg(config("single_agent.json")));
    assert_eq!(code, 0);
    assert_eq!(report["valid"], Value::Bool(true));
    assert!((num(&report["min_denominator"]) - 0.01).abs() < 1e-15);
    assert_eq!(report["n_compositions"], 1);
}

#[test]
fn validate_lists_offending_compositions() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "bad.json", &single_agent(0.001, 2));
    let (code, report, stderr) = run(exe().arg("validate").arg(&path));
    assert_eq!(code, 1);
    assert_eq!(report["valid"], Value::Bool(false));
    let offending = report["offending"].as_array().unwrap();
    assert_eq!(offending.len(), 1);
    assert_eq!(offending[0]["beta"], serde_json::json!([2]));
    assert!((num(&offending[0]["denominator"]) + 0.009).abs() < 1e-15);
    assert!(!stderr.is_empty());
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let low_r = write_config(dir.path(), "r1.json", &single_agent(0.02, 1));
    let (code, _, stderr) = run(exe().arg("validate").arg(&low_r));
    assert_eq!(code, 2);
    assert!(stderr.contains("model requires integer R >= 2"), "{stderr}");

    let frac_r = write_config(dir.path(), "r25.json", &single_agent(0.02, 2).replace("\"R\": 2", "\"R\": 2.5"));
    assert_eq!(run(exe().arg("validate").arg(&frac_r)).0, 2);

    let missing = dir.path().join("nope.json");
    assert_eq!(run(exe().arg("validate").arg(&missing)).0, 2);
    assert_eq!(run(exe().arg("frobnicate")).0, 2);
}

#[test]
fn evaluate_benchmark_snapshot() {
    let (code, snap, _) = run(exe().arg("evaluate").arg(config("single_agent.json")));
    assert_eq!(code, 0);
    assert!((num(&snap["stock_price"]) - 100.0).abs() < 1e-10);
    assert!((num(&snap["wealths"][0]) - 100.0).abs() < 1e-10);
    assert!((num(&snap["pd_ratio"]) - 100.0).abs() < 1e-10);
    assert!((num(&snap["rates"]["riskless_rate"]) + 0.01).abs() < 1e-15);
    assert!((num(&snap["portfolios"][0]) - 1.0).abs() < 1e-12);
}

#[test]
fn evaluate_symmetric_pair_prices_risk_at_r_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "pair.json",
        r#"{"R": 3, "sigma": 0.1, "alpha_star": 0.0, "delta0": 1.0,
            "agents": [{"rho": 0.3, "alpha": 0.3, "gamma": 0.0},
                       {"rho": 0.3, "alpha": -0.3, "gamma": 0.0}]}"#,
    );
    let (code, snap, _) = run(exe().arg("evaluate").arg(&path));
    assert_eq!(code, 0);
    assert!(num(&snap["rates"]["alpha_bar"]).abs() < 1e-15);
    assert!((num(&snap["rates"]["kappa"]) - 0.3).abs() < 1e-15);
}

#[test]
fn evaluate_output_is_stable_and_round_trips() {
    let args = ["evaluate", "--t", "1.5", "--x", "-0.4"];
    let cfg = config("three_agents.json");
    let a = exe().args(args).arg(&cfg).output().unwrap();
    let b = exe().args(args).arg(&cfg).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let snap: crra_equilibrium::EquilibriumSnapshot = serde_json::from_slice(&a.stdout).unwrap();
    let params = crra_equilibrium::EconomyParams::from_json(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let table = crra_equilibrium::validate(&params).unwrap();
    let direct = crra_equilibrium::equilibrium::snapshot(snap.state, &params, &table).unwrap();
    assert_eq!(snap.stock_price, direct.stock_price);
    assert_eq!(snap.wealths, direct.wealths);
    assert_eq!(snap.portfolios, direct.portfolios);
}

#[test]
fn simulate_writes_clearing_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paths.csv");
    let (code, summary, _) = run(exe()
        .args(["simulate", "--paths", "3", "--horizon", "1", "--steps", "16", "--seed", "5", "--out"])
        .arg(&out)
        .arg(config("three_agents.json")));
    assert_eq!(code, 0);
    assert_eq!(summary["n_rows"], 51);

    let mut reader = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.len(), 11 + 9);
    assert_eq!(&header[..4], ["path_id", "t", "x", "delta"]);
    assert_eq!(&header[11..14], ["c_1", "w_1", "pi_1"]);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut rows = 0;
    for record in reader.records() {
        let r = record.unwrap();
        let f = |name: &str| r[col(name)].parse::<f64>().unwrap();
        let (c, w, pi): (f64, f64, f64) = (1..=3).fold((0.0, 0.0, 0.0), |acc, j| {
            (acc.0 + f(&format!("c_{j}")), acc.1 + f(&format!("w_{j}")), acc.2 + f(&format!("pi_{j}")))
        });
        assert!((c - f("delta")).abs() <= 1e-12 * f("delta"));
        assert!((w - f("S")).abs() <= 1e-10 * f("S"));
        assert!((pi - 1.0).abs() <= 1e-10);
        rows += 1;
    }
    assert_eq!(rows, 51);
}

#[test]
fn simulate_unwritable_output_exits_three() {
    let (code, _, _) = run(exe()
        .args(["simulate", "--out", "/nonexistent-dir/x/y.csv"])
        .arg(config("single_agent.json")));
    assert_eq!(code, 3);
}

#[test]
fn verify_benchmark_passes_everything() {
    let (code, report, stderr) = run(exe()
        .args(["verify", "--suite", "all", "--states", "5", "--paths", "20000", "--seed", "3"])
        .arg(config("single_agent.json")));
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn verify_detects_biased_rate() {
    let (code, report, stderr) = run(exe()
        .args(["verify", "--suite", "fd", "--states", "5", "--fault-riskless-rate", "1e-3"])
        .arg(config("two_agents.json")));
    assert_eq!(code, 1);
    assert_eq!(report["passed"], Value::Bool(false));
    assert!(stderr.contains("riskless_rate"), "{stderr}");
}

#[test]
fn verify_clearing_on_three_agents() {
    let (code, report, _) = run(exe()
        .args(["verify", "--suite", "clearing", "--states", "10"])
        .arg(config("three_agents.json")));
    assert_eq!(code, 0);
    assert!(!report["checks"].as_array().unwrap().is_empty());
}

#[test]
fn calibrate_trivial_targets() {
    let (code, res, _) = run(exe().args(["calibrate", "--shares", "1.0"]).arg(config("single_agent.json")));
    assert_eq!(code, 0);
    assert_eq!(res["gamma"], serde_json::json!([0.0]));

    let dir = tempfile::tempdir().unwrap();
    let twins = write_config(
        dir.path(),
        "twins.json",
        r#"{"R": 2, "sigma": 0.1, "alpha_star": 0.0, "delta0": 1.0,
            "agents": [{"rho": 0.05, "alpha": 0.1, "gamma": 0.7},
                       {"rho": 0.05, "alpha": 0.1, "gamma": -0.2}]}"#,
    );
    let (code, res, _) = run(exe().args(["calibrate", "--shares", "0.5,0.5"]).arg(&twins));
    assert_eq!(code, 0);
    for g in res["gamma"].as_array().unwrap() {
        assert!(num(g).abs() < 1e-12);
    }
}

#[test]
fn calibrate_hits_target_shares() {
    let (code, res, _) = run(exe().args(["calibrate", "--shares", "0.2,0.5,0.3"]).arg(config("three_agents.json")));
    assert_eq!(code, 0);
    for (got, want) in res["achieved_shares"].as_array().unwrap().iter().zip([0.2, 0.5, 0.3]) {
        assert!((num(got) - want).abs() < 1e-9);
    }
    let (code, _, _) = run(exe().args(["calibrate", "--shares", "0.2,0.5"]).arg(config("three_agents.json")));
    assert_eq!(code, 2);
}
