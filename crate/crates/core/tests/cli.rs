use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qheat::harness::{ScenarioConfig, EXIT_BOUNDARY, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"
model = "two-qubit"

[params]
e1 = 1.0
e2 = 2.0
g = 0.1
p1 = 0.1
p2 = 0.1
tc = 1.0
th = 4.0

[window]
n_min = -10
n_max = 30

[integrator]
t_max = 100.0

[output]
prefix = "small"
"#;

const QUTRIT_SMALL: &str = r#"
model = "qutrit"

[params]
e1 = 1.0
e2 = 1.0
g = 0.05
pc = 0.1
pr = 0.1
ph = 0.1
tc = 1.0
tr = 20.0
th = 10.0

[window]
n_min = -10
n_max = 30

[integrator]
t_max = 100.0

[output]
prefix = "qutrit"
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn qheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qheat"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn run_cmd(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    qheat(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run_cmd("simulate", &cfg, out, &[]);
        assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    }
    for f in ["small_trajectory.csv", "small_trajectory.json", "small_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let csv = fs::read_to_string(a.join("small_trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,Ew_mean,Ew_var,delta_re,delta_im,gamma1,gamma2,q_c,q_h,boundary_pop,trace_residual"
    );
    let ts: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*ts.last().unwrap(), 100.0);

    // The echoed config re-parses to the same scenario and reproduces the run.
    let summary = read_json(&a.join("small_summary.json"));
    let echoed = ScenarioConfig::from_json_value(summary["config"].clone()).unwrap();
    assert_eq!(echoed, ScenarioConfig::load(&cfg).unwrap());
    let json_cfg = tmp.path().join("echo.json");
    fs::write(&json_cfg, serde_json::to_string_pretty(&summary["config"]).unwrap()).unwrap();
    let c = tmp.path().join("c");
    assert_eq!(code(&run_cmd("simulate", &json_cfg, &c, &[])), EXIT_OK);
    assert_eq!(
        fs::read(a.join("small_trajectory.csv")).unwrap(),
        fs::read(c.join("small_trajectory.csv")).unwrap()
    );
    let toml_cfg = tmp.path().join("echo.toml");
    fs::write(&toml_cfg, echoed.to_toml_string().unwrap()).unwrap();
    assert_eq!(ScenarioConfig::load(&toml_cfg).unwrap(), echoed);

    let drift = summary["fit"]["drift"].as_f64().unwrap();
    assert!((drift - 3.62e-3).abs() < 0.01 * 3.62e-3, "{drift}");
}

#[test]
fn inverted_gaps_fail_validation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &SMALL.replace("e2 = 2.0", "e2 = 0.5"));
    let o = run_cmd("simulate", &cfg, tmp.path(), &[]);
    assert_eq!(code(&o), EXIT_VALIDATION);
    let err = stderr(&o);
    assert!(err.contains("`e2`") && err.contains("energy-matching"), "{err}");
    assert!(fs::read_dir(tmp.path()).unwrap().count() == 1, "nothing may be written");
}

#[test]
fn unknown_keys_and_missing_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &SMALL.replace("g = 0.1", "g = 0.1\ngg = 2"));
    let o = run_cmd("simulate", &cfg, tmp.path(), &[]);
    assert_eq!(code(&o), EXIT_VALIDATION);
    assert!(stderr(&o).contains("gg"), "{}", stderr(&o));
    let o = run_cmd("verify", &tmp.path().join("absent.toml"), tmp.path(), &[]);
    assert_eq!(code(&o), EXIT_IO);
}

#[test]
fn decoupled_config_has_zero_drift() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g0.toml", &SMALL.replace("g = 0.1", "g = 0.0"));
    let o = run_cmd("simulate", &cfg, tmp.path(), &[]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let summary = read_json(&tmp.path().join("small_summary.json"));
    assert_eq!(summary["fit"]["drift"].as_f64().unwrap(), 0.0);
}

#[test]
fn narrow_window_reports_boundary_overflow() {
    let tmp = TempDir::new().unwrap();
    let body = SMALL.replace("n_min = -10", "n_min = -3").replace("n_max = 30", "n_max = 3");
    let cfg = write_config(tmp.path(), "narrow.toml", &body);
    let o = run_cmd("simulate", &cfg, tmp.path(), &[]);
    assert_eq!(code(&o), EXIT_BOUNDARY);
    assert!(stderr(&o).contains("boundary"), "{}", stderr(&o));
}

#[test]
fn verify_at_carnot_point_uses_absolute_tolerance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "carnot.toml", &SMALL.replace("th = 4.0", "th = 2.0"));
    let o = run_cmd("verify", &cfg, tmp.path(), &[]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let report = read_json(&tmp.path().join("small_verify.json"));
    assert_eq!(report["pass"], Value::Bool(true));
    let row = report["rows"].as_array().unwrap().iter().find(|r| r["name"] == "work_rate").unwrap();
    assert_eq!(row["tolerance"]["kind"], "absolute");
    assert_eq!(row["tolerance"]["value"].as_f64().unwrap(), 1e-6);
    assert!(tmp.path().join("small_verify.txt").exists());
}

#[test]
fn verify_qutrit_reports_formula_gap() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "q.toml", QUTRIT_SMALL);
    let o = run_cmd("verify", &cfg, tmp.path(), &[]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let report = read_json(&tmp.path().join("qutrit_verify.json"));
    let rows = report["rows"].as_array().unwrap();
    let info = rows.iter().find(|r| r["name"] == "equal_rates_printed_formula").unwrap();
    assert_eq!(info["tolerance"]["kind"], "informational");
    let w = rows.iter().find(|r| r["name"] == "work_rate").unwrap();
    assert_eq!(w["pass"], Value::Bool(true));
}

#[test]
fn sweep_flags_invalid_points_and_keeps_order() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL);
    let o = run_cmd("sweep", &cfg, tmp.path(), &["--param", "th", "--grid", "3,0.5,4"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("small_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "Th,bias_gap,work_rate,eta_ideal,eta_carnot");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("3.0000000000000000e0,") && !lines[1].contains("NaN"));
    assert_eq!(lines[2], "5.0000000000000000e-1,NaN,NaN,NaN,NaN");
    assert!(lines[3].starts_with("4.0000000000000000e0,") && !lines[3].contains("NaN"));
    let json = read_json(&tmp.path().join("small_sweep.json"));
    let points = json["points"].as_array().unwrap();
    assert!(points[0]["error"].is_null());
    assert!(points[1]["error"].as_str().unwrap().contains("th"));
}

#[test]
fn sweep_above_carnot_point() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL);
    let o = run_cmd("sweep", &cfg, tmp.path(), &["--param", "th", "--grid", "2.1:8:20"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("small_sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert!(r[2] > 0.0);
        assert!(r[3] < r[4]);
    }
}

#[test]
fn sweep_output_independent_of_worker_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "q.toml", QUTRIT_SMALL);
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = tmp.path().join(workers);
        let o = Command::new(env!("CARGO_BIN_EXE_qheat"))
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--param", "th", "--grid", "1:20:12", "--quiet"])
            .env("QHEAT_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
        outputs.push(fs::read(out.join("qutrit_sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs.pop().unwrap()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "Th,work_rate,lifting_general,lifting_equal_rates");
}

#[test]
fn sweep_with_simulation_adds_drift_column() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL);
    let o = run_cmd("sweep", &cfg, tmp.path(), &["--param", "g", "--grid", "0.05,0.1", "--simulate"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("small_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "g,bias_gap,work_rate,eta_ideal,eta_carnot,sim_drift");
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[5] - v[2]).abs() < 0.01 * v[2], "{l}");
    }
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL);
    let o = run_cmd("sweep", &cfg, tmp.path(), &["--param", "pc", "--grid", "1,2"]);
    assert_eq!(code(&o), EXIT_VALIDATION);
    assert!(stderr(&o).contains("pc"), "{}", stderr(&o));
    let o = run_cmd("sweep", &cfg, tmp.path(), &["--param", "th", "--grid", "1:2"]);
    assert_eq!(code(&o), EXIT_VALIDATION);
}
