use std::path::Path;
use std::process::{Command, Output};

use hyperpm::Hypergraph;
use serde_json::Value;

fn hyperpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperpm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn write_k6(dir: &Path) -> String {
    let path = dir.join("k6.khg");
    hyperpm::io::write_hypergraph(&Hypergraph::complete(6, 3).unwrap(), &path).unwrap();
    path.display().to_string()
}

#[test]
fn count_of_k6() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write_k6(tmp.path());
    let out_dir = tmp.path().join("out").display().to_string();
    let out = hyperpm(&["count", "--graph", &g, "--out", &out_dir]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout_json(&out)["value"], "10");
}

#[test]
fn entropy_of_k6() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write_k6(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = hyperpm(&[
        "entropy",
        "--graph",
        &g,
        "--out",
        &out_dir.display().to_string(),
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["h"].as_f64().unwrap() - 2.0 * 10f64.ln()).abs() < 1e-6);
    assert_eq!(v["converged"], true);
    assert!(out_dir.join("entropy.wts").exists());
    let w = hyperpm::io::read_weights(
        &Hypergraph::complete(6, 3).unwrap(),
        out_dir.join("entropy.wts"),
    )
    .unwrap();
    assert!(w.iter().all(|&x| (x - 0.1).abs() < 1e-8));
}

#[test]
fn missing_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hyperpm(&[
        "count",
        "--graph",
        "/nonexistent/g.khg",
        "--out",
        &tmp.path().display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = hyperpm(&["count", "--graph", "g.khg", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stderr_json(&out);
    assert_eq!(v["error"]["kind"], "usage");
    assert!(v["error"]["message"].as_str().unwrap().contains("--bogus"));
}

#[test]
fn bad_tolerance_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write_k6(tmp.path());
    for tol in ["0", "-1e-9", "0.5", "NaN"] {
        let flag = format!("--tol={tol}");
        let out = hyperpm(&[
            "entropy",
            "--graph",
            &g,
            &flag,
            "--out",
            &tmp.path().display().to_string(),
        ]);
        assert_eq!(out.status.code(), Some(2), "tol {tol}");
        assert_eq!(stderr_json(&out)["error"]["kind"], "invalid-argument");
    }
}

#[test]
fn randomized_commands_need_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hyperpm(&[
        "gen",
        "--n",
        "9",
        "--k",
        "3",
        "--d",
        "2",
        "--out",
        &tmp.path().display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "invalid-argument");
    let out = hyperpm(&["greedy", "--graph", "x.khg"]);
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
}

#[test]
fn greedy_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("k9.khg");
    hyperpm::io::write_hypergraph(&Hypergraph::complete(9, 3).unwrap(), &g).unwrap();
    let out_dir = tmp.path().join("out").display().to_string();
    let args = [
        "greedy",
        "--graph",
        g.to_str().unwrap(),
        "--seed",
        "5",
        "--trials",
        "4",
        "--out",
        &out_dir,
    ];
    let first = hyperpm(&args);
    assert!(first.status.success());
    let csv = std::fs::read(tmp.path().join("out/trajectory_002.csv")).unwrap();
    let second = hyperpm(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(
        csv,
        std::fs::read(tmp.path().join("out/trajectory_002.csv")).unwrap()
    );
}

#[test]
fn verify_dir_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write_k6(tmp.path());
    let out_dir = tmp.path().join("run");
    let out_s = out_dir.display().to_string();
    let check_dir = tmp.path().join("check").display().to_string();
    assert!(hyperpm(&["marginals", "--graph", &g, "--out", &out_s])
        .status
        .success());

    let ok = hyperpm(&["verify", "--dir", &out_s, "--out", &check_dir]);
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );

    let wts = out_dir.join("marginals.wts");
    let text = std::fs::read_to_string(&wts).unwrap();
    std::fs::write(
        &wts,
        text.replacen("# config-digest: ", "# config-digest: 0", 1),
    )
    .unwrap();
    let bad = hyperpm(&["verify", "--dir", &out_s, "--out", &check_dir]);
    assert_eq!(bad.status.code(), Some(1));

    std::fs::write(&wts, text).unwrap();
    std::fs::write(&g, "3 6\n0 1 2\n3 4 5\n").unwrap();
    let bad = hyperpm(&["verify", "--dir", &out_s, "--out", &check_dir]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn bound_report_on_k6() {
    let tmp = tempfile::tempdir().unwrap();
    let g = write_k6(tmp.path());
    let out = hyperpm(&[
        "bound",
        "--graph",
        &g,
        "--d",
        "2",
        "--out",
        &tmp.path().join("o").display().to_string(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert!((v["bound"].as_f64().unwrap() - 2.0 * 10f64.ln()).abs() < 1e-9);
    assert!(v["provenance"]["config_digest"].is_string());
}
