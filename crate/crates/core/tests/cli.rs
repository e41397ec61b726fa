use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dyniter"))
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str], config: Option<&Path>, out: Option<&Path>) -> Output {
    let mut c = bin();
    c.args(args);
    if let Some(p) = config {
        c.arg("--config").arg(p);
    }
    if let Some(p) = out {
        c.arg("--out").arg(p);
    }
    c.output().unwrap()
}

fn routing_family() -> Value {
    json!({
        "kind": "routing",
        "epochs": [
            {"weights": [[null, 1, null], [1, null, 1], [null, 1, null]], "participants": [0, 1, 2]},
            {"weights": [[null, 2, 4], [2, null, 1], [4, 1, null]], "participants": [0, 2]},
            {"weights": [[null, 1, 1], [1, null, 2], [1, 2, null]], "participants": [0, 1]}
        ],
        "destination": 0,
        "cap": 4
    })
}

fn routing_config(trials: usize) -> Value {
    json!({
        "schedule": {
            "n": 3, "horizon": 200, "activation_probability": 0.6, "max_delay": 3,
            "loss_probability": 0.2, "duplication_probability": 0.1, "seed": 5
        },
        "family": routing_family(),
        "harness": {
            "trials": trials, "seed": 11,
            "churn": {"min_events": 2, "max_events": 4, "inclusion_probability": 0.6}
        }
    })
}

#[test]
fn converge_on_routing_succeeds_with_full_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "routing.json", &routing_config(500));
    let out = dir.path().join("summary.json");
    let o = run(&["converge"], Some(&cfg), Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["trials"], 500);
    assert_eq!(summary["rate"], 1.0);
    assert_eq!(summary["seed"], 11);
    assert!(summary["qualifying_epochs"].as_u64().unwrap() > 0);
}

#[test]
fn boxes_certificate_gives_the_same_summary() {
    let dir = TempDir::new().unwrap();
    let mut c = routing_config(30);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let cfg = write(&dir, "d.json", &c);
    assert_eq!(run(&["converge"], Some(&cfg), Some(&a)).status.code(), Some(0));
    c["harness"]["certificate"] = json!("boxes");
    let cfg = write(&dir, "b.json.cfg", &c);
    assert_eq!(run(&["converge"], Some(&cfg), Some(&b)).status.code(), Some(0));
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn seed_and_trials_flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "routing.json", &routing_config(50));
    let out = dir.path().join("s.json");
    let o = run(&["converge", "--seed", "99", "--trials", "7"], Some(&cfg), Some(&out));
    assert_eq!(o.status.code(), Some(0));
    let summary: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["seed"], 99);
    assert_eq!(summary["trials"], 7);
}

#[test]
fn identity_fails_amco_with_a_witness() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "id.json", &json!({"family": {"kind": "identity", "n": 2, "values": 2}}));
    let o = run(&["check-amco"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["conditions"]["DU4"], false);
    assert_eq!(report["witness"]["condition"], "DU4");
    assert!(String::from_utf8_lossy(&o.stderr).contains("DU4"));
}

#[test]
fn missing_config_file_exits_two() {
    let o = run(&["converge"], Some(Path::new("/nonexistent/config.json")), None);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["check-amco"], None, None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_key() {
    let dir = TempDir::new().unwrap();
    let mut c = routing_config(5);
    c["harness"]["churn"]["min_events"] = json!(9);
    let cfg = write(&dir, "bad.json", &c);
    let o = run(&["converge"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("harness.churn.min_events"));

    let mut c = routing_config(5);
    c["schedule"]["loss_probability"] = json!(1.5);
    let cfg = write(&dir, "bad2.json", &c);
    let o = run(&["converge"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schedule.loss_probability"));

    let mut c = routing_config(5);
    c["family"]["cap"] = json!("four");
    let cfg = write(&dir, "bad3.json", &c);
    let o = run(&["converge"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("family"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "routing.json", &routing_config(20));
    for cmd in ["simulate", "pseudocycles", "converge", "reduce", "check-amco"] {
        let a = run(&[cmd], Some(&cfg), None);
        let b = run(&[cmd], Some(&cfg), None);
        assert_eq!(a.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&a.stderr));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn reduced_boxes_round_trip_into_check_aco() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "routing.json", &json!({"family": routing_family()}));
    let boxes = dir.path().join("boxes.json");
    assert_eq!(run(&["reduce"], Some(&cfg), Some(&boxes)).status.code(), Some(0));
    let parsed: Value = serde_json::from_str(&fs::read_to_string(&boxes).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 3);
    assert_eq!(parsed[0]["kstar"], 7);

    let cfg = write(
        &dir,
        "aco.json",
        &json!({"family": routing_family(), "boxes": boxes.to_str().unwrap()}),
    );
    let o = run(&["check-aco"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn epoch_constant_fails_only_da4() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ec.json", &json!({"family": {"kind": "epoch_constant", "n": 2}}));
    let o = run(&["check-aco"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = report["conditions"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(_, ok)| *ok == &json!(false))
        .map(|(c, _)| c.as_str())
        .collect();
    assert_eq!(failed, vec!["DA4"]);
}

#[test]
fn simulate_writes_a_trace_and_annotations() {
    let dir = TempDir::new().unwrap();
    let mut c = routing_config(1);
    c["initial"] = json!([0, "inf", 3]);
    let cfg = write(&dir, "sim.json", &c);
    let o = run(&["simulate"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<Value> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 201 * 3);
    assert_eq!(lines[1]["value"], "inf");
    assert_eq!(lines[2]["value"], 3);

    let o = run(&["simulate", "--annotate"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first: Value = serde_json::from_str(String::from_utf8(o.stdout).unwrap().lines().next().unwrap()).unwrap();
    for key in ["t", "i", "state_box", "msgs_box", "well_formed", "computation_box"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn pseudocycles_respect_the_scope_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "routing.json", &routing_config(1));
    for scope in ["epoch", "horizon"] {
        let o = run(&["pseudocycles", "--scope", scope], Some(&cfg), None);
        assert_eq!(o.status.code(), Some(0));
        for line in String::from_utf8(o.stdout).unwrap().lines() {
            let p: Value = serde_json::from_str(line).unwrap();
            assert!(p["t1"].as_u64().unwrap() < p["t2"].as_u64().unwrap());
        }
    }
    assert_eq!(run(&["pseudocycles", "--scope", "forever"], Some(&cfg), None).status.code(), Some(2));
}

#[test]
fn oracle_check_passes_and_reports_the_budget() {
    let dir = TempDir::new().unwrap();
    let ok = write(
        &dir,
        "o.json",
        &json!({"family": {"kind": "min_consensus", "n": 2, "max": 1}, "oracle": {"horizon": 2, "alternative": [1]}}),
    );
    let o = run(&["oracle-check"], Some(&ok), None);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["passed"], true);
    assert_eq!(r["schedules"], 768);

    let big = write(
        &dir,
        "big.json",
        &json!({"family": {"kind": "flip", "n": 2}, "oracle": {"horizon": 5, "alternative": [0]}}),
    );
    let o = run(&["oracle-check"], Some(&big), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("oracle.budget"));
}

#[test]
fn flip_is_refused_then_explored() {
    let dir = TempDir::new().unwrap();
    let mut c = json!({
        "schedule": {"n": 2, "horizon": 20, "activation_probability": 1.0},
        "family": {"kind": "flip", "n": 2},
        "harness": {"trials": 4, "seed": 1}
    });
    let cfg = write(&dir, "flip.json", &c);
    assert_eq!(run(&["converge"], Some(&cfg), None).status.code(), Some(1));
    c["harness"]["exploratory"] = json!(true);
    let cfg = write(&dir, "flip2.json", &c);
    let o = run(&["converge"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(1));
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(s["rate"].as_f64().unwrap() < 1.0);
    assert!(!s["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn demo_stale_needs_no_config() {
    let o = run(&["demo-stale"], None, None);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["not_well_formed"], json!([4]));
    assert_eq!(r["expiry_end"], 6);
    assert_eq!(r["control_stale_reads"], 0);
}
