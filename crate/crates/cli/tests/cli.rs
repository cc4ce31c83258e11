use std::path::Path;
use std::process::{Command, Output};

use ltp_harmonic::case_study::{self, Reading};
use ltp_harmonic::{control, floquet, sylvester};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ltp-harmonic"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, value: &Value) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string(value).unwrap()).unwrap();
    p
}

fn constant_config() -> Value {
    serde_json::json!({
        "system": {
            "A": {"rows": 2, "cols": 2, "T": 1.0, "terms": [
                {"kind": "const", "row": 0, "col": 1, "value": 1.0},
                {"kind": "const", "row": 1, "col": 0, "value": -2.0},
                {"kind": "const", "row": 1, "col": 1, "value": -0.5}
            ]},
            "B": {"rows": 2, "cols": 1, "T": 1.0, "terms": [
                {"kind": "const", "row": 1, "col": 0, "value": 1.0}
            ]}
        }
    })
}

fn csv_matrix(path: &Path) -> Vec<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let v: Vec<f64> = rec.unwrap().iter().map(|s| s.parse().unwrap()).collect();
            v.chunks(2).map(|c| (c[0], c[1])).collect()
        })
        .collect()
}

#[test]
fn config_prints_case_study() {
    let out = bin().arg("config").output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["system"]["A"]["rows"], 2);
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let mut cfg = constant_config();
    cfg["system"]["B"]["rows"] = Value::from(3);
    let p = write_config(dir.path(), &cfg);
    let out = run(&["lift", "--config", p.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let missing = run(&["lift", "--config", "/nonexistent/config.json"], &dir.path().join("o"));
    assert_eq!(missing.status.code(), Some(2));
    let steps = run(&["floquet", "--steps", "0"], &dir.path().join("o"));
    assert_eq!(steps.status.code(), Some(2));
}

#[test]
fn non_invertible_design_exits_3() {
    let dir = TempDir::new().unwrap();
    let mut cfg: Value = serde_json::from_slice(&bin().arg("config").output().unwrap().stdout).unwrap();
    let period = cfg["system"]["A"]["T"].clone();
    let g = serde_json::json!({"rows": 1, "cols": 2, "T": period, "terms": [
        {"kind": "const", "row": 0, "col": 0, "value": 1.0},
        {"kind": "const", "row": 0, "col": 1, "value": 1.0}
    ]});
    let z = |re: f64| serde_json::json!({"re": re, "im": 0.0});
    cfg["design"] = serde_json::json!({"direct": {"G": g, "Lambda": [[z(-5.0), z(0.0)], [z(0.0), z(-7.0)]]}});
    let p = write_config(dir.path(), &cfg);
    let out = run(
        &["design", "--config", p.to_str().unwrap(), "--m", "6"],
        &dir.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = json(&dir.path().join("o/certificate.json"));
    assert_eq!(cert["invertible"], false);
}

#[test]
fn lift_at_order_zero_is_a() {
    let dir = TempDir::new().unwrap();
    let p = write_config(dir.path(), &constant_config());
    let out = run(&["lift", "--config", p.to_str().unwrap(), "--m", "0"], dir.path());
    assert!(out.status.success());
    let a = csv_matrix(&dir.path().join("lift_A_m0.csv"));
    let want = [[0.0, 1.0], [-2.0, -0.5]];
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(a[i][j], (want[i][j], 0.0));
        }
    }
    // N_0 = 0, so the harmonic operator equals A as well
    assert_eq!(csv_matrix(&dir.path().join("harmonic_operator_m0.csv")), a);
}

#[test]
fn sylvester_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = run(&["sylvester", "--m", "10"], dir.path());
    assert!(out.status.success());
    let got = json(&dir.path().join("sylvester_m10.json"));
    let (a, b) = case_study::system::<f64>(Reading::Sawtooth);
    let fl = floquet::factorize(&a, 20000).unwrap();
    let g = control::sufficient_g(&b, &fl, 10).unwrap();
    let sol = sylvester::solve_truncated(&a, &b, &g, &control::sufficient_lambda(&fl, 1.0), 10).unwrap();
    let want = serde_json::to_value(sol.to_json()).unwrap();
    assert_eq!(got["m"], 10);
    let (gp, wp) = (got["phasors"].as_array().unwrap(), want["phasors"].as_array().unwrap());
    assert_eq!(gp.len(), 21);
    let flat = |v: &Value, out: &mut Vec<f64>| {
        fn walk(v: &Value, out: &mut Vec<f64>) {
            match v {
                Value::Number(n) => out.push(n.as_f64().unwrap()),
                Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
                _ => {}
            }
        }
        walk(v, out)
    };
    let (mut x, mut y) = (Vec::new(), Vec::new());
    flat(&Value::Array(gp.clone()), &mut x);
    flat(&Value::Array(wp.clone()), &mut y);
    assert_eq!(x.len(), y.len());
    for (p, q) in x.iter().zip(&y) {
        assert!((p - q).abs() < 1e-12, "{p} vs {q}");
    }
}

#[test]
fn sweep_writes_decreasing_deltas() {
    let dir = TempDir::new().unwrap();
    let out = run(&["sylvester", "--m", "4,6,8,10,12"], dir.path());
    assert!(out.status.success());
    let rows = json(&dir.path().join("sweep.json"))["rows"].as_array().unwrap().clone();
    let d: Vec<f64> = rows.iter().map(|r| r["delta_to_finest"].as_f64().unwrap()).collect();
    assert_eq!(d.len(), 5);
    assert!(d.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn design_certificate_passes() {
    let dir = TempDir::new().unwrap();
    let out = run(&["design", "--alpha", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = json(&dir.path().join("certificate.json"));
    assert_eq!(cert["invertible"], true);
    assert!(cert["min_abs_det"].as_f64().unwrap() > cert["threshold"].as_f64().unwrap());
    assert!(dir.path().join("gain.json").exists());
    assert!(dir.path().join("k_trace.csv").exists());
}

#[test]
fn design_then_simulate_tracks() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().join("d");
    assert!(run(&["design", "--alpha", "1"], &d).status.success());
    let gain = d.join("gain.json");
    let s = dir.path().join("s");
    let out = run(&["simulate", "--gain", gain.to_str().unwrap()], &s);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&s.join("simulation.json"));
    assert_eq!(summary["closed_loop"], true);
    let segs = summary["segments"].as_array().unwrap();
    assert_eq!(segs.len(), 3);
    for seg in segs {
        assert!(seg["error_at_end"].as_f64().unwrap() < seg["error_at_start"].as_f64().unwrap());
    }
    // the open loop diverges from the same state
    let o = dir.path().join("o");
    assert!(run(&["simulate"], &o).status.success());
    let open = json(&o.join("simulation.json"));
    assert!(open["final_norm"].as_f64().unwrap() > 1e3 * summary["final_norm"].as_f64().unwrap());
}

#[test]
fn simulation_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut cfg: Value = serde_json::from_slice(&bin().arg("config").output().unwrap().stdout).unwrap();
    cfg["simulation"]["x0"] = Value::Null;
    cfg["simulation"]["t_end"] = Value::from(2.0);
    let p = write_config(dir.path(), &cfg);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for o in [&a, &b] {
        let out = run(&["simulate", "--config", p.to_str().unwrap(), "--seed", "7"], o);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ca = std::fs::read(a.join("simulation.csv")).unwrap();
    assert!(!ca.is_empty());
    assert_eq!(ca, std::fs::read(b.join("simulation.csv")).unwrap());
    assert_eq!(
        json(&a.join("simulation.json"))["x0"],
        json(&b.join("simulation.json"))["x0"]
    );
}

#[test]
fn counter_example_reports_escape() {
    let dir = TempDir::new().unwrap();
    let out = run(&["case-study", "--counter-example"], dir.path());
    assert!(out.status.success());
    let ce = json(&dir.path().join("counter_example.json"));
    assert_eq!(ce["status"], "NotInvertible");
    assert_eq!(ce["observability"]["passes"], true);
    assert!(ce["escape"]["escape_time"].as_f64().unwrap() < 1.0);
}

#[test]
fn case_study_rejects_config() {
    let dir = TempDir::new().unwrap();
    let p = write_config(dir.path(), &constant_config());
    let out = run(&["case-study", "--config", p.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
