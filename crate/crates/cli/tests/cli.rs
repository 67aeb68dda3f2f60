use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rfde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfde")).args(args).output().expect("spawn rfde")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name).display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rfde-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn trivial_solve_is_the_line() {
    let out = scratch("trivial.csv");
    let o = rfde(&["solve", &config("trivial.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&out);
    assert!(rows.len() > 10);
    for r in &rows {
        // x(t) = 1 + 0.5 t, x' = 0.5
        assert!((r[1] - (1.0 + 0.5 * r[0])).abs() < 1e-12, "{r:?}");
        assert!((r[2] - 0.5).abs() < 1e-12);
    }
    let escape: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("csv.escape.json")).unwrap()).unwrap();
    assert_eq!(escape["reached_horizon"], true);
}

#[test]
fn constant_lag_matches_shipped_oracle() {
    let out = scratch("lag.csv");
    let o = rfde(&["solve", &config("constant_lag.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = rfde(&["compare", out.to_str().unwrap(), &config("constant_lag.oracle.csv"), "--tol", "1e-6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn compare_with_itself_is_zero() {
    let o = rfde(&["compare", &config("constant_lag.oracle.csv"), &config("constant_lag.oracle.csv")]);
    assert_eq!(o.status.code(), Some(0));
    let diff: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert_eq!(diff, 0.0);
}

#[test]
fn riccati_reports_escape() {
    let out = scratch("riccati.csv");
    let o = rfde(&["solve", &config("riccati_ode.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let escape: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("csv.escape.json")).unwrap()).unwrap();
    let t = escape["escape"]["t_escape"].as_f64().unwrap();
    assert!((t - 1.0).abs() < 0.01, "{t}");
}

#[test]
fn malformed_json_reports_position() {
    let bad = scratch("bad.json");
    std::fs::write(&bad, "{\"schema\": 1,\n \"n\": 1,\n oops}").unwrap();
    let o = rfde(&["solve", bad.to_str().unwrap(), "--out", scratch("bad.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn step_oracle_rejects_state_dependent_lag() {
    let o = rfde(&["oracle", &config("state_dependent.json"), "--method", "step", "--out", scratch("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inapplicable"));
}

#[test]
fn cocycle_probe_passes() {
    let o = rfde(&["probe", &config("constant_lag.json"), "--name", "cocycle"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn memories_constant_is_zero() {
    let o = rfde(&["lipschitz", &config("constant_lag.json"), "--mode", "memories", "--samples", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let first = String::from_utf8_lossy(&o.stdout).lines().next().unwrap().to_string();
    assert_eq!(first.trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn sequential_and_parallel_agree() {
    let a = scratch("seq.csv");
    let b = scratch("par.csv");
    assert_eq!(rfde(&["--threads", "1", "solve", &config("pantograph.json"), "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(rfde(&["--threads", "4", "solve", &config("pantograph.json"), "--out", b.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}
