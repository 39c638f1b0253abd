//! End-to-end runs of the binary: exit codes, outputs, determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_framefield"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn check_passes_on_compatible_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "fixture": "sphere", "samples": [13, 13], "seed": 7 }"#,
    );
    let out = bin().arg("check").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("check passed"));
    // all seven families listed
    for fam in ["gauss", "ricci", "codazzi", "codazzi2", "torsion_tangent", "torsion_normal", "inner_torsion"] {
        assert!(text.contains(fam), "family {fam} missing from report");
    }
}

#[test]
fn check_fails_and_names_family_on_perturbed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "fixture": "sphere", "samples": [13, 13], "alpha_scale": 1.1 }"#,
    );
    let out = bin().arg("check").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gauss"), "should name the violated family: {text}");
}

#[test]
fn malformed_dimension_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "fixture": "sphere", "model": { "kind": "space_form", "curvature": 0.0, "dim": 4, "index": 0 } }"#,
    );
    let out = bin().arg("check").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let bad = write_config(dir.path(), r#"{ "fixture": "sphere", "unknown_key": 1 }"#);
    let out2 = bin().arg("check").arg(&bad).output().unwrap();
    assert_eq!(out2.status.code(), Some(2));
}

#[test]
fn solve_writes_mesh_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{ "fixture": "flat_plane", "samples": [7, 7], "output": {{ "dir": "{}" }} }}"#,
            outdir.display()
        ),
    );
    let out = bin().arg("solve").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let obj = std::fs::read_to_string(outdir.join("solution.obj")).unwrap();
    assert!(obj.lines().filter(|l| l.starts_with("v ")).count() == 49);
    assert!(obj.lines().filter(|l| l.starts_with("f ")).count() == 36);
    let csv = std::fs::read_to_string(outdir.join("solution.csv")).unwrap();
    assert!(csv.lines().count() == 50);
    assert!(csv.lines().next().unwrap().starts_with("x0,x1,f0,f1,f2"));
}

#[test]
fn solve_gate_failure_exits_1_and_force_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "fixture": "sphere", "samples": [13, 13], "alpha_scale": 1.1 }"#,
    );
    let out = bin().arg("solve").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out2 = bin()
        .arg("solve")
        .arg(&cfg)
        .args(["--force", "--step-refine", "4"])
        .output()
        .unwrap();
    // forced solve runs; verification may or may not pass, but it must not
    // be a config error
    assert_ne!(out2.status.code(), Some(2));
}

#[test]
fn catalog_lists_families_and_json_schema() {
    let out = bin().arg("catalog").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("model families (5)"));
    assert!(text.contains("structure variants (9)"));
    let out2 = bin().args(["catalog", "--model", "ekappatau"]).output().unwrap();
    let text2 = String::from_utf8_lossy(&out2.stdout);
    assert!(text2.contains("kappa") && text2.contains("tau") && text2.contains("dim = 3"));
    let out3 = bin().args(["catalog", "--model", "space_form", "--json"]).output().unwrap();
    let parsed: serde_json::Value =
        serde_json::from_slice(&out3.stdout).expect("catalog --json must be valid JSON");
    assert_eq!(parsed["models"][0]["model"], "space_form");
}

#[test]
fn identical_config_and_seed_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (outdir, _) in [(&out_a, 0), (&out_b, 1)] {
        let cfg = write_config(
            dir.path(),
            &format!(
                r#"{{ "fixture": "sphere", "samples": [21, 21], "seed": 99, "output": {{ "dir": "{}" }} }}"#,
                outdir.display()
            ),
        );
        assert!(bin().arg("check").arg(&cfg).output().unwrap().status.success());
        assert!(bin().arg("solve").arg(&cfg).output().unwrap().status.success());
    }
    for name in ["check_report.json", "solution.obj", "solution.csv", "solve_summary.json"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn export_writes_grid_fields() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("fields");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{ "fixture": "nil_cylinder", "samples": [9, 9], "output": {{ "dir": "{}" }} }}"#,
            outdir.display()
        ),
    );
    let out = bin().arg("export").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let metric = std::fs::read_to_string(outdir.join("metric.grid")).unwrap();
    assert!(metric.starts_with("# framefield-grid v1"));
    assert!(outdir.join("alpha0.grid").exists());
}
