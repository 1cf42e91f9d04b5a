//! End-to-end tests of the command-line surface: plan validation and exit
//! codes, the structured error envelope, artifact shapes, manifest
//! completeness, and byte-identical reruns of identical plans.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use besovlab::sfld::read_field;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_besovlab"))
        .args(args)
        .output()
        .expect("spawn besovlab")
}

fn stderr_envelope(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| {
        panic!("stderr is not a JSON envelope ({e}): {text}");
    })
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect();
    (header, rows)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

// ---------------------------------------------------------------------
// exit codes and the error envelope
// ---------------------------------------------------------------------

#[test]
fn help_and_version_exit_zero() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["norms", "construct", "picard-sweep", "algebra-sweep", "simulate", "decompose"] {
        assert!(text.contains(cmd), "--help does not mention {cmd}");
    }
    assert!(run(&["--version"]).status.success());
}

#[test]
fn rejects_alpha_outside_domain() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["norms", "--alpha", "1.5", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let env = stderr_envelope(&out);
    assert_eq!(env["error"]["kind"], "validation");
    assert_eq!(env["error"]["command"], "norms");
    assert!(env["error"]["message"].as_str().unwrap().contains("alpha"));
}

#[test]
fn rejects_bad_sweep_syntax() {
    for bad in ["4..6:cubic", "6..4:geometric", "16..64:linear:1", "abc"] {
        let out = run(&["picard-sweep", "--N", bad]);
        assert_eq!(out.status.code(), Some(2), "sweep `{bad}` accepted");
        assert_eq!(stderr_envelope(&out)["error"]["kind"], "validation");
    }
}

#[test]
fn rejects_sweep_for_single_size_commands() {
    let out = run(&["simulate", "--N", "16..64:geometric"]);
    assert_eq!(out.status.code(), Some(2));
    let env = stderr_envelope(&out);
    assert!(env["error"]["message"].as_str().unwrap().contains("single N"));
}

#[test]
fn rejects_non_planar_simulation() {
    let out = run(&["simulate", "--N", "6", "--d", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_envelope(&out)["error"]["kind"], "validation");
}

#[test]
fn rejects_unknown_flags_with_envelope() {
    let out = run(&["norms", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_envelope(&out)["error"]["kind"], "validation");
}

#[test]
fn rejects_bad_worker_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_besovlab"))
        .args(["norms", "--N", "6", "--output-dir", dir.path().to_str().unwrap()])
        .env("BESOVLAB_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_envelope(&out)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("BESOVLAB_WORKERS"));
}

// ---------------------------------------------------------------------
// config file layering
// ---------------------------------------------------------------------

#[test]
fn config_values_override_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plan.json");
    // flag alpha is valid; config alpha is out of domain and must win
    fs::write(&config, r#"{ "alpha": 2.0 }"#).unwrap();
    let out = run(&[
        "norms",
        "--alpha",
        "0.75",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_envelope(&out)["error"]["message"].as_str().unwrap().contains("alpha"));
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plan.json");
    fs::write(&config, r#"{ "alhpa": 0.8 }"#).unwrap();
    let out = run(&["norms", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_envelope(&out)["error"]["message"].as_str().unwrap().contains("alhpa"));
}

#[test]
fn config_supplies_sweep_and_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plan.json");
    fs::write(
        &config,
        format!(
            r#"{{ "n": "4..6:linear:3", "p": "inf", "output_dir": "{}" }}"#,
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = run(&["norms", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let man = manifest(&dir.path().join("out"));
    assert_eq!(man["params"]["sweep"], serde_json::json!([4, 5, 6]));
    assert_eq!(man["params"]["p"], "inf");
    let (_, rows) = read_csv(&dir.path().join("out").join("norms.csv"));
    assert_eq!(rows.len(), 18, "3 sizes x 2 fields x 3 regularities");
}

// ---------------------------------------------------------------------
// artifact shapes and the manifest
// ---------------------------------------------------------------------

#[test]
fn norms_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["norms", "--N", "6", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("norms.csv"));
    assert_eq!(header, "n,field,s,p,q,total,log2_total");
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert_eq!(row[0], "6");
        assert!(row[1] == "u0" || row[1] == "b0");
        let total: f64 = row[5].parse().unwrap();
        assert!(total.is_finite() && total > 0.0);
    }
    let man = manifest(dir.path());
    assert_eq!(man["command"], "norms");
    assert_eq!(man["params"]["sweep"], serde_json::json!([6]));
    assert_eq!(man["outputs"], serde_json::json!(["norms.csv"]));
    assert!(man["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn norms_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "norms",
        "--N",
        "5",
        "--format",
        "json",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("norms.json")).unwrap()).unwrap();
    let reports = doc.as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["params"]["n"], 5);
    assert_eq!(reports[0]["velocity"].as_array().unwrap().len(), 3);
    assert_eq!(reports[0]["magnetic"].as_array().unwrap().len(), 3);
}

#[test]
fn construct_renders_readable_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "construct",
        "--N",
        "4",
        "--grid",
        "256",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("construction.json")).unwrap())
            .unwrap();
    assert_eq!(doc["params"]["n"], 4);
    for name in ["u0.sfld", "b0.sfld"] {
        let field = read_field(&dir.path().join(name)).unwrap();
        assert_eq!(field.shape(), &[256, 256]);
        assert_eq!(field.ncomp(), 2);
        assert!(field.l2_norm() > 0.0);
    }
    let man = manifest(dir.path());
    assert_eq!(
        man["outputs"],
        serde_json::json!(["construction.json", "u0.sfld", "b0.sfld"])
    );
}

// ---------------------------------------------------------------------
// sweeps: table shapes and byte-identical reruns
// ---------------------------------------------------------------------

#[test]
fn picard_sweep_is_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run(&["picard-sweep", "--N", "16", "--output-dir", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir_a.path().join("picard_sweep.csv")).unwrap();
    let b = fs::read(dir_b.path().join("picard_sweep.csv")).unwrap();
    assert_eq!(a, b, "identical plans must produce byte-identical tables");

    let (header, rows) = read_csv(&dir_a.path().join("picard_sweep.csv"));
    assert_eq!(header, "n,alpha,p,q,lambda,ib1,ib2,ib_total,ib_signed_total,quad_error");
    assert_eq!(rows.len(), 1);
    let ib_total: f64 = rows[0][7].parse().unwrap();
    let quad: f64 = rows[0][9].parse().unwrap();
    assert!(ib_total > 0.0);
    assert!(quad < 1e-3);
}

#[test]
fn algebra_sweep_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["algebra-sweep", "--N", "16", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("algebra_sweep.csv"));
    assert_eq!(header, "n,alpha,p,q,norm_f,norm_g,product_lower_bound,quad_error");
    assert_eq!(rows.len(), 1);
    let norm_f: f64 = rows[0][4].parse().unwrap();
    let norm_g: f64 = rows[0][5].parse().unwrap();
    let lb: f64 = rows[0][6].parse().unwrap();
    assert!(norm_f > 0.0 && norm_g > 0.0 && lb > 0.0);
}

// ---------------------------------------------------------------------
// simulation commands
// ---------------------------------------------------------------------

#[test]
fn simulate_writes_timeseries_and_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_besovlab"))
        .args([
            "simulate",
            "--N",
            "4",
            "--grid",
            "512",
            "--t-end",
            "1e-5",
            "--steps",
            "4",
            "--checkpoints",
            "2",
            "--output-dir",
            dir.path().to_str().unwrap(),
        ])
        .env("BESOVLAB_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&dir.path().join("timeseries.csv"));
    assert!(header.starts_with("t,u_besov_dpm1,"));
    assert_eq!(rows.len(), 3, "t = 0 plus two checkpoints");
    for row in &rows {
        let sobolev_b: f64 = row[8].parse().unwrap();
        assert!(sobolev_b.is_finite() && sobolev_b > 0.0);
    }

    let (_, diag_rows) = read_csv(&dir.path().join("diagnostics.csv"));
    assert_eq!(diag_rows.len(), 4, "one diagnostics row per step");
    for row in &diag_rows {
        let div_u: f64 = row[7].parse().unwrap();
        assert!(div_u < 1e-10);
    }

    let (_, sup_rows) = read_csv(&dir.path().join("timesup_magnetic.csv"));
    assert!(!sup_rows.is_empty());

    for name in ["u_final.sfld", "b_final.sfld"] {
        let field = read_field(&dir.path().join(name)).unwrap();
        assert_eq!(field.shape(), &[512, 512]);
    }

    let outputs = manifest(dir.path())["outputs"].as_array().unwrap().len();
    assert_eq!(outputs, 5);
}

#[test]
fn decompose_reports_the_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "decompose",
        "--N",
        "4",
        "--grid",
        "512",
        "--t-end",
        "1e-5",
        "--steps",
        "4",
        "--format",
        "json",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("decomposition.json")).unwrap())
            .unwrap();
    let first = doc["l2_first_iterate"].as_f64().unwrap();
    let remainder = doc["l2_remainder"].as_f64().unwrap();
    assert!(first.is_finite() && first > 0.0);
    assert!(remainder.is_finite() && remainder >= 0.0);
    assert!(
        remainder < first,
        "the first iterate should dominate the Duhamel remainder over a short horizon"
    );
}
