use std::path::Path;
use std::process::{Command, Output};

fn simplexlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simplexlab"))
        .args(args)
        .env_remove("SIMPLEXLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.ini");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn negative_epsilon_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[experiment]\nkind = mollify\n\n[measure]\nkind = sierpinski\ndepth = 4\n\n[mollify]\nepsilons = 0.25, -0.125\n",
    );
    let out = dir.path().join("out");
    let res = simplexlab(&["-c", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!out.exists());
}

#[test]
fn mismatched_kind_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[experiment]\nkind = omega-verify\n\n[omega]\ncase = circle\n");
    let res = simplexlab(&["frostman", "-c", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn circle_check_reports_and_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[experiment]\nkind = omega-verify\nseed = 3\n\n[omega]\ncase = circle\n");
    let out = dir.path().join("out");
    let res = simplexlab(&["omega-verify", "-c", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("max relative error"), "{stdout}");

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(summary["kind"], "omega-verify");
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["config"]["experiment"]["seed"], "3");
    assert_eq!(summary["config"]["omega"]["case"], "circle");
    assert!(out.join("omega.csv").exists());
}

#[test]
fn estimate_writes_one_row_per_scale_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[experiment]\nkind = estimate\n\n[measure]\nkind = sierpinski\ndepth = 5\n\n\
         [mollify]\nepsilons = 0.25, 0.125\nhalfwidth = 3.0\ngrid = 96\n\n\
         [pattern]\nkind = equilateral\n\n[estimate]\nlambdas = 0.2, 0.3\nsamples = 5000\n",
    );
    let out = dir.path().join("out");
    let res = simplexlab(&["-c", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("estimates.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,epsilon,T,std_err,n_samples"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let t: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(t >= 0.0);
    }
}
