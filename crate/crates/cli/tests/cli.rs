//! End-to-end runs of the `sbl` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_of(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).expect("stderr is one JSON object")
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/bound_report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn as_f64s(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn sphere_report_is_all_twos() {
    let out = sbl(&["bounds", "--shape", "sphere", "--param", "m=2,r=1", "--grid", "64", "--direction", "1,2,3"]);
    let r = json_stdout(&out);
    assert!(schema().is_valid(&r));
    for key in ["reilly"] {
        assert!((r[key].as_f64().unwrap() - 2.0).abs() < 1e-10);
    }
    for v in [&r["best_pr1"]["value"], &r["best_pr2"]["value"], &r["pr1_at"][0]["value"], &r["pr2_at"][0]["value"]] {
        assert!((v.as_f64().unwrap() - 2.0).abs() < 1e-10);
    }
    assert_eq!(r["q"]["inertia"], serde_json::json!([0, 3, 0]));
}

#[test]
fn torus_report_carries_the_reilly_value() {
    let out = sbl(&["bounds", "--shape", "torus", "--param", "R=1.4142135623730951"]);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let r = json_stdout(&out);
    assert!(schema().is_valid(&r));
    assert!(text.contains("\"reilly\": 0.70710678118654"));
    let reilly = r["reilly"].as_f64().unwrap();
    assert!((reilly - std::f64::consts::FRAC_1_SQRT_2).abs() <= 2.0 * f64::EPSILON);
    assert_eq!(r["best_pr1"]["attained"], Value::Bool(false));
    assert_eq!(r["q"]["inertia"], serde_json::json!([2, 0, 1]));
    assert!(r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn vanishing_torus_report_warns() {
    let out = sbl(&["bounds", "--shape", "torus", "--param", "R=1.0606601717798212"]);
    let r = json_stdout(&out);
    assert!(schema().is_valid(&r));
    let w = r["warnings"].as_array().unwrap();
    assert_eq!(w.len(), 1);
    let msg = w[0].as_str().unwrap();
    assert!(msg.contains("sqrt(2)/2") && msg.contains("1.5"), "{msg}");
    assert!((r["reilly"].as_f64().unwrap() - 1.5).abs() < 1e-9);
}

#[test]
fn report_with_mesh_checks_domination() {
    let out = sbl(&["bounds", "--shape", "clifford", "--grid", "64", "--mesh", "48x48", "--direction", "1,0,0,0"]);
    let r = json_stdout(&out);
    assert!(schema().is_valid(&r));
    let l = r["mesh_lambda1"].as_f64().unwrap();
    assert!((l - 2.0).abs() < 0.04);
    assert!(r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn schema_rejects_a_missing_key() {
    let out = sbl(&["bounds", "--shape", "ellipsoid", "--param", "a=1.5", "--grid", "64"]);
    let mut r = json_stdout(&out);
    assert!(schema().is_valid(&r));
    r.as_object_mut().unwrap().remove("identities");
    assert!(!schema().is_valid(&r));
}

#[test]
fn scan_csv_has_one_row_per_direction() {
    let out = sbl(&["scan", "--shape", "torus", "--param", "R=2", "--grid", "64", "--sphere-scan", "50"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "v1,v2,v3,Q,b,b_tilde");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    for r in &rows {
        let norm: f64 = r[..3].iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        // Q(v) < 0 puts PR1 below PR2, Q(v) > 0 the other way round.
        if r[3] < -1e-6 {
            assert!(r[4] < r[5]);
        } else if r[3] > 1e-6 {
            assert!(r[4] > r[5]);
        }
    }
}

#[test]
fn qform_prints_matrix_spectrum_and_inertia() {
    let out = sbl(&["qform", "--shape", "torus", "--param", "R=2", "--grid", "64"]);
    let r = json_stdout(&out);
    assert_eq!(r["inertia"], serde_json::json!([2, 0, 1]));
    let ev = as_f64s(&r["eigenvalues"]);
    assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    let out = sbl(&["qform", "--shape", "torus", "--param", "R=2", "--grid", "64", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("row,c1,c2,c3\nq1,"));
    assert!(text.contains("\ninertia,2,0,1\n"));
}

#[test]
fn mesh_lambda1_from_shape_and_off() {
    let dir = tempfile::tempdir().unwrap();
    let off = dir.path().join("sphere.off");
    let off_s = off.to_str().unwrap();
    let out = sbl(&["mesh-lambda1", "--shape", "sphere", "--mesh", "64x32", "--save-off", off_s]);
    let r = json_stdout(&out);
    assert_eq!(r["euler_characteristic"], 2);
    let a = r["lambda1"].as_f64().unwrap();
    let out = sbl(&["mesh-lambda1", "--off", off_s]);
    let b = json_stdout(&out)["lambda1"].as_f64().unwrap();
    assert_eq!(a, b);
}

#[test]
fn paper_table_json_rows() {
    let out = sbl(&["paper-table", "--format", "json", "--mesh", "64x32"]);
    let r = json_stdout(&out);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["regime"], "Q indefinite, negative on v3^2<1/3");
    assert_eq!(rows[1]["regime"], "Q indefinite, positive on v3^2<1/3");
    assert_eq!(rows[2]["regime"], "Q vanishes");
    assert!((rows[0]["best_pr1"].as_f64().unwrap() - 0.552284).abs() < 1e-6);
    assert!((rows[1]["reilly"].as_f64().unwrap() - 2.061552).abs() < 1e-6);
    assert!((rows[1]["best_pr1"].as_f64().unwrap() - 1.609611).abs() < 1e-6);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn output_file_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    let out_path = dir.path().join("report.json");
    std::fs::write(
        &cfg,
        "shape = torus\nparam = R=3\ngrid = 32x32\n\n[bounds]\ndirection = 1,0,0; 0,0,1\n",
    )
    .unwrap();
    let out = sbl(&[
        "bounds",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "64",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["grid"], serde_json::json!([64, 64]));
    assert_eq!(r["params"]["R"], 3.0);
    assert_eq!(r["pr1_at"].as_array().unwrap().len(), 2);
    // Only the report itself is left in the directory.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["bounds", "--grid", "3x3"],
        vec!["bounds", "--direction", "1,0"],
        vec!["bounds", "--param", "R"],
        vec!["launch"],
        vec!["mesh-lambda1", "--shape", "sphere", "--param", "m=3"],
    ] {
        let out = sbl(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_of(&out)["error"], "UsageError", "{args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_sbl"))
        .args(["qform", "--grid", "16"])
        .env("SBL_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn core_errors_exit_three_with_their_name() {
    let out = sbl(&["bounds", "--param", "R=0.9"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["error"], "BadParameter");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("quad.off");
    std::fs::write(&bad, "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap();
    let out = sbl(&["mesh-lambda1", "--off", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["error"], "NonTriangleFace");

    let out = sbl(&["mesh-lambda1", "--off", dir.path().join("missing.off").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["error"], "IoError");
}
