//! End-to-end smoke tests for the `mest` binary: exit codes, persisted
//! reports and manifests, and rerun determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mest"))
        .args(args)
        .output()
        .expect("failed to spawn mest")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn estimate_euclidean_mean() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "space.json", r#"{"kind":"euclidean","dim":2}"#);
    let loss = write(dir.path(), "loss.json", r#"{"kind":"power","p":2.0}"#);
    let data = write(
        dir.path(),
        "data.json",
        r#"{"points":[[0,0],[2,0],[0,2],[2,2]]}"#,
    );
    let out = dir.path().join("est.json");
    let res = mest(&[
        "estimate",
        "--space",
        &space,
        "--loss",
        &loss,
        "--data",
        &data,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{res:?}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let x_hat = report["x_hat"].as_array().unwrap();
    for c in x_hat {
        assert!((c.as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
    assert!(report["converged"].as_bool().unwrap());
    let manifest = out.with_extension("json.manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn estimate_rejects_bad_space() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "space.json", r#"{"kind":"sphere","dim":0,"kappa":-1}"#);
    let loss = write(dir.path(), "loss.json", r#"{"kind":"power","p":2.0}"#);
    let data = write(dir.path(), "data.json", r#"{"points":[[1,0]]}"#);
    let out = dir.path().join("est.json");
    let res = mest(&[
        "estimate", "--space", &space, "--loss", &loss, "--data", &data, "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2), "{res:?}");
    assert!(!out.exists(), "no report should be written on config error");
}

fn clt_config() -> &'static str {
    r#"{
      "space": {"kind": "euclidean", "dim": 1},
      "loss": {"kind": "power", "p": 2.0},
      "sampler": {"kind": "tangent_gaussian", "center": [0.0], "scale": 1.0},
      "n": 50,
      "reps": 10,
      "seed": 7
    }"#
}

#[test]
fn clt_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "clt.json", clt_config());
    let run = |tag: &str| -> (Vec<u8>, Vec<u8>) {
        let out = dir.path().join(format!("clt-{tag}.json"));
        let csv = dir.path().join(format!("clt-{tag}.csv"));
        let res = mest(&[
            "clt",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--errors-csv",
            csv.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{res:?}");
        (fs::read(out).unwrap(), fs::read(csv).unwrap())
    };
    let (report_a, csv_a) = run("a");
    let (report_b, csv_b) = run("b");
    assert_eq!(report_a, report_b, "reports differ between identical runs");
    assert_eq!(csv_a, csv_b, "error CSVs differ between identical runs");
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 10, "one CSV row per replication");
}

#[test]
fn clt_seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "clt.json", clt_config());
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    let res = mest(&["clt", "--config", &config, "--out", out_a.to_str().unwrap()]);
    assert!(res.status.success(), "{res:?}");
    let res = mest(&[
        "clt", "--config", &config, "--seed", "8", "--out", out_b.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{res:?}");
    assert_ne!(fs::read(out_a).unwrap(), fs::read(out_b).unwrap());
}

#[test]
fn consistency_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "cons.json",
        r#"{
          "space": {"kind": "euclidean", "dim": 2},
          "loss": {"kind": "power", "p": 2.0},
          "sampler": {"kind": "tangent_gaussian", "center": [0.0, 0.0], "scale": 1.0},
          "n_grid": [20, 80, 320],
          "reps": 10,
          "seed": 3
        }"#,
    );
    let out = dir.path().join("cons.json.out");
    let res = mest(&["consistency", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{res:?}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let slope = report["slope"].as_f64().unwrap();
    assert!((-0.8..=-0.2).contains(&slope), "slope {slope}");
}

#[test]
fn experiment_without_n_or_grid_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.json",
        r#"{
          "space": {"kind": "euclidean", "dim": 1},
          "loss": {"kind": "power", "p": 2.0},
          "sampler": {"kind": "tangent_gaussian", "center": [0.0], "scale": 1.0},
          "reps": 5,
          "seed": 1
        }"#,
    );
    let out = dir.path().join("out.json");
    let res = mest(&["clt", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "{res:?}");
}

#[test]
fn selftest_passes_on_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "space.json", r#"{"kind":"sphere","dim":3,"kappa":1.0}"#);
    let out = dir.path().join("selftest.json");
    let res = mest(&[
        "selftest", "--space", &space, "--n", "500", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{res:?}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["pass"].as_bool().unwrap());
}

#[test]
fn cat_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "space.json", r#"{"kind":"sphere","dim":3,"kappa":1.0}"#);
    // The sphere is CAT(1): certification succeeds.
    let res = mest(&["cat-check", "--space", &space, "--kappa", "1.0", "--triangles", "50"]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    // It is not CAT(0): violations are found and reported with exit code 1.
    let res = mest(&["cat-check", "--space", &space, "--kappa", "0.0", "--triangles", "50"]);
    assert_eq!(res.status.code(), Some(1), "{res:?}");
}
