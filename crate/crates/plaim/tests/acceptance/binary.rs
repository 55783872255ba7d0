//! End-to-end checks of the `plaim` binary: exit codes, config handling, and
//! byte-identical outputs across reruns.

use std::process::Command;

fn plaim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plaim"))
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let out = plaim().arg("fig9-nope").output().expect("spawn");
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn missing_experiment_is_a_usage_error() {
    let out = plaim().output().expect("spawn");
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn config_floor_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment":"fig4-valley","grid_resolution":10}"#).unwrap();
    let out = plaim().arg("--config").arg(&cfg).output().expect("spawn");
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\n  broken\n}").unwrap();
    let out = plaim().arg("--config").arg(&cfg).output().expect("spawn");
    assert_eq!(out.status.code(), Some(64));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn outputs_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let status = plaim()
            .args(["fig4-valley", "--seed", "3", "--out"])
            .arg(out_dir)
            .env("PLAIM_THREADS", "2")
            .status()
            .expect("spawn");
        assert!(status.success());
    }
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"summary.txt".to_string()));
    assert!(names.iter().any(|n| n.ends_with(".csv")));
    for name in names {
        let bytes_a = std::fs::read(a.join(&name)).unwrap();
        let bytes_b = std::fs::read(b.join(&name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between reruns");
    }
}

#[test]
fn csv_files_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    let status = plaim()
        .args(["fig4-valley", "--out"])
        .arg(dir.path())
        .status()
        .expect("spawn");
    assert!(status.success());
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let text = std::fs::read_to_string(&path).unwrap();
            let header = text.lines().next().unwrap_or_default();
            assert!(
                header.split(',').count() >= 2 && header.chars().any(|c| c.is_alphabetic()),
                "{} lacks a header row: {header}",
                path.display()
            );
        }
    }
}

#[test]
fn check_mode_flags_reference_misses() {
    // the figure-1 table intentionally misses two 2-D reference cells
    let dir = tempfile::tempdir().unwrap();
    let out = plaim()
        .args(["fig1-table", "--check", "--grid-resolution", "20000", "--out"])
        .arg(dir.path())
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
}
