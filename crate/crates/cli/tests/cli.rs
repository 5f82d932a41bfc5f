//! Behaviour of the `quantbound` binary.

use std::path::Path;
use std::process::{Command, Output};

use quantbound::bounds::StepCdfLowerBound;
use quantbound::risk::{evaluate_qbrm, MetricKind};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quantbound"))
        .args(args)
        .env_remove("QUANTBOUND_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn num(v: &Value) -> f64 {
    match v {
        Value::String(s) if s == "inf" => f64::INFINITY,
        other => f(other),
    }
}

#[test]
fn bound_reports_levels_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "losses.csv", "loss\n0.7\n0.2\n");
    let csv = dir.path().join("bound.csv");
    let r = json(&run(&[
        "bound", "--input", &input, "--method", "bj", "--delta", "0.05", "--x-plus", "1",
        "--export-csv", csv.to_str().unwrap(),
    ]));
    let levels = r["bound"]["levels"].as_array().unwrap();
    assert!((f(&levels[0]) - 0.01369).abs() < 2e-4);
    assert!((f(&levels[1]) - 0.16492).abs() < 2e-4);
    let p = &r["provenance"];
    assert_eq!(f(&p["delta"]), 0.05);
    assert_eq!(f(&p["delta_prime"]), 0.05);
    assert_eq!(p["n"], 2);
    assert_eq!(p["m"], 1);
    assert_eq!(p["boundary_checksum"].as_str().unwrap().len(), 64);
    assert!((f(&p["critical_value"]) - 0.0272).abs() < 5e-4);

    let exported = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = exported.lines().collect();
    assert_eq!(lines[0], "x,level");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[3], "1.0,1.0");
}

#[test]
fn report_round_trip_reproduces_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..50).map(|i| format!("{}\n", ((i * 37) % 50) as f64 / 50.0)).collect();
    let input = write(dir.path(), "l.csv", &format!("loss\n{rows}"));
    let r = json(&run(&[
        "bound", "--input", &input, "--method", "bj-one-sided", "--target", "cvar:0.8",
        "--metric", "mean", "--metric", "var:0.9", "--bounded-unit-loss",
    ]));
    let b = &r["bound"];
    let xs: Vec<f64> = b["breakpoints"].as_array().unwrap().iter().map(f).collect();
    let ls: Vec<f64> = b["levels"].as_array().unwrap().iter().map(f).collect();
    let g = StepCdfLowerBound::from_constraints(&xs, &ls, num(&b["x_plus"])).unwrap();
    for entry in r["metrics"].as_array().unwrap() {
        let metric: MetricKind = entry["metric"].as_str().unwrap().parse().unwrap();
        let again = evaluate_qbrm(&g, &metric.weight().unwrap());
        assert_eq!(again.to_bits(), num(&entry["bound"]).to_bits(), "{metric}");
    }
    // The recorded method reproduces the boundary checksum.
    let again = json(&run(&[
        "bound", "--input", &input, "--method",
        &format!("bj-one-sided:{}", r["provenance"]["method"]["beta_min"]),
        "--bounded-unit-loss",
    ]));
    assert_eq!(again["provenance"]["boundary_checksum"], r["provenance"]["boundary_checksum"]);
}

#[test]
fn critical_values() {
    let r = json(&run(&["critical", "--method", "bj", "--n", "1", "--delta", "0.05"]));
    assert!((f(&r["provenance"]["critical_value"]) - 0.05).abs() < 1e-9);
    assert_eq!(r["boundary"].as_array().unwrap().len(), 1);
    let r = json(&run(&["critical", "--method", "ks", "--n", "1", "--delta", "0.1"]));
    assert!((f(&r["provenance"]["critical_value"]) + 0.9).abs() < 1e-9);
    let r = json(&run(&["critical", "--method", "dkw", "--target", "var:0.9", "--n", "500"]));
    assert_eq!(r["provenance"]["grid_indices"][0], 478);
}

#[test]
fn select_toy_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "m.csv", "A,B\n0.2,0.5\n0.7,0.6\n");
    let r = json(&run(&["select", "--input", &input, "--delta", "0.1", "--bounded-unit-loss"]));
    let s = &r["selection"];
    assert_eq!(s["chosen"], "B");
    assert_eq!(f(&s["provenance"]["delta_prime"]), 0.05);
    assert_eq!(s["provenance"]["m"], 2);
    let preds = s["predictors"].as_array().unwrap();
    assert!((f(&preds[0]["target_bound"]) - 0.94368).abs() < 1e-4);
    assert!((f(&preds[1]["target_bound"]) - 0.93266).abs() < 1e-4);
}

#[test]
fn grouped_selection_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("group,t1,t2\n");
    for i in 0..40 {
        let g = if i % 2 == 0 { "a" } else { "b" };
        let u = i as f64 / 40.0;
        text.push_str(&format!("{g},{},{}\n", u * 0.5, u * u));
    }
    let input = write(dir.path(), "g.csv", &text);
    let out_dir = dir.path().join("reports");
    let csv = dir.path().join("groups.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_quantbound"))
        .args(["select", "--input", &input, "--group-column", "group", "--bounded-unit-loss"])
        .args(["--export-csv", csv.to_str().unwrap()])
        .env("QUANTBOUND_OUTPUT_DIR", &out_dir)
        .output()
        .unwrap();
    let r = json(&out);
    let groups = r["groups"].as_object().unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups["a"]["provenance"]["n"], 20);
    assert_eq!(f(&groups["a"]["provenance"]["delta"]), 0.05);
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("select.json")).unwrap()).unwrap();
    assert_eq!(saved, r);
    assert!(std::fs::read_to_string(csv).unwrap().starts_with("group,x,level\n"));

    let joint = json(&run(&[
        "select", "--input", &input, "--group-column", "group", "--joint-groups", "--bounded-unit-loss",
    ]));
    assert_eq!(f(&joint["groups"]["b"]["provenance"]["delta"]), 0.025);
}

#[test]
fn infinite_bounds_are_strings_with_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "l.csv", "loss\n1\n2\n3\n");
    let r = json(&run(&["bound", "--input", &input, "--target", "var:0.5", "--metric", "cvar:0.9"]));
    assert_eq!(r["bound"]["x_plus"], "inf");
    assert!(r["metrics"].as_array().unwrap().iter().any(|m| m["bound"] == "inf"));
    assert!(!r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "l.csv", "loss\n0.1\n0.2\n");
    let infeasible = run(&["critical", "--method", "dkw", "--target", "var:0.9", "--n", "100"]);
    assert_eq!(infeasible.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("beta=0.9"));
    // Mean needs an upper bound on the loss.
    assert_eq!(run(&["bound", "--input", &input]).status.code(), Some(1));
    assert_eq!(run(&["bound", "--input", "/nonexistent.csv", "--x-plus", "1"]).status.code(), Some(1));
    assert_eq!(run(&["bound", "--input", &input, "--delta", "1.5", "--x-plus", "1"]).status.code(), Some(1));
    assert_eq!(run(&["bound", "--input", &input, "--target", "median"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "exp.toml",
        r#"
n = 50
trials = 100
seed = 3
delta = 0.1
methods = ["bj", "ks"]
metrics = ["mean", "cvar:0.9"]

[distribution]
kind = "beta"
a = 2.0
b = 5.0
"#,
    );
    let csv = dir.path().join("table.csv");
    let r = json(&run(&["simulate", "--config", &config, "--export-csv", csv.to_str().unwrap()]));
    let rows = r["results"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["method"], "bj");
    assert_eq!(rows[0]["metric"], "mean");
    assert_eq!(rows[0]["implication_failures"], 0);
    assert!(r["rng"].as_str().unwrap().contains("chacha8"));
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("method,metric,loss_violation_rate,lcb_violation_rate"));

    // Flags override the file and runs are reproducible.
    let a = json(&run(&["simulate", "--config", &config, "--trials", "60", "--method", "bj"]));
    let b = json(&run(&["simulate", "--config", &config, "--trials", "60", "--method", "bj"]));
    assert_eq!(a, b);
    assert_eq!(a["results"][0]["trials"], 60);

    let bad = write(dir.path(), "bad.toml", "n = 10\ntrials = 5\nmethods=[\"bj\"]\nmetrics=[\"mean\"]\nunknown = 1\n[distribution]\nkind=\"uniform\"\n");
    assert_eq!(run(&["simulate", "--config", &bad]).status.code(), Some(1));
}
