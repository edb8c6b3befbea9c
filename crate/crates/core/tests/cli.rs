//! End-to-end runs of the compiled binary: config handling, artifacts,
//! exit codes, and the determinism contract at the file level.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pshenv");

const DISC: &str = r#"
h = 0.0625
obstacle = "0"
f = "4"
exact = "x ^ 2 + y ^ 2 - 1"

[domain]
kind = "ball"
n = 1
center = [0.0, 0.0]
radius = 1.0
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn pshenv(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn envelope_run_produces_readable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISC);
    let out_dir = dir.path().join("artifacts");
    let out = pshenv(&[
        "envelope",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));

    let p = pshenv::io::read_grid_function(&out_dir.join("p.pshg")).unwrap();
    assert_eq!(p.grid.h, 0.0625);
    let report: toml::Value = fs::read_to_string(out_dir.join("report.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(report["pass"].as_bool(), Some(true));
    assert_eq!(report["config"]["h"].as_float(), Some(0.0625));
}

#[test]
fn unknown_key_is_fatal_only_in_strict_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &DISC.replace("f = \"4\"", "f = \"4\"\nmetod = \"berman\""));
    let out_dir = dir.path().join("o");

    let strict = pshenv(&[
        "envelope",
        "--strict",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(stderr(&strict).contains("did you mean `method`?"), "{}", stderr(&strict));

    let lax = pshenv(&[
        "envelope",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(lax.status.success(), "{}", stderr(&lax));
    assert!(stderr(&lax).contains("warning"));
}

#[test]
fn negative_density_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &DISC.replace("f = \"4\"", "f = \"-1\""));
    let out = pshenv(&["envelope", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("must be ≥ 0"), "{}", stderr(&out));
}

#[test]
fn sweep_modes_write_identical_grids_at_stabilization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &DISC.replace("f = \"4\"", "f = \"4\"\n\n[tolerances]\ntol = 1e-300"),
    );
    for mode in ["seq", "redblack"] {
        let out_dir = dir.path().join(mode);
        let out = pshenv(&[
            "envelope",
            "--config",
            cfg.to_str().unwrap(),
            "--mode",
            mode,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{mode}: {}", stderr(&out));
    }
    let a = fs::read(dir.path().join("seq/p.pshg")).unwrap();
    let b = fs::read(dir.path().join("redblack/p.pshg")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn capacity_needs_a_set_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISC);
    let out_dir = dir.path().join("o");
    let out = pshenv(&[
        "capacity",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let record = fs::read_to_string(out_dir.join("failures.toml")).unwrap();
    assert!(record.contains("[set]"));
}

#[test]
fn verify_selection_errors_on_unknown_names() {
    let out = pshenv(&["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no criterion matches"));
}

#[test]
fn verify_runs_selected_criteria_and_records_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("v");
    let out = pshenv(&["verify", "9", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("translation equivariance"));
    let csv = fs::read_to_string(out_dir.join("verdicts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn unwritable_output_directory_exits_nonzero_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISC);
    let blocker = dir.path().join("blocked");
    fs::write(&blocker, b"plain file").unwrap();
    let out_dir = blocker.join("sub");
    let out = pshenv(&[
        "envelope",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read(&blocker).unwrap(), b"plain file");
}

#[test]
fn convergence_requires_a_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &DISC.replace("exact = \"x ^ 2 + y ^ 2 - 1\"\n", ""),
    );
    let out = pshenv(&["convergence", "1/16", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("exact"));
}
