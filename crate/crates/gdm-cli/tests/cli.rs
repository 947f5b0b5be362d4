//! End-to-end runs of the installed binary: exit codes, artifact layout,
//! and byte-stable CSV output.

use std::path::Path;
use std::process::{Command, Output};

use gdm_core::basis::Configuration;
use gdm_core::gdm::{slater_gdm, tag_site_pairs, Gdm};
use gdm_core::io;
use gdm_core::linalg::CMat;
use num_complex::Complex64;

const HUB3: &str = r#"{
  "n_sites": 3,
  "spacing": 1.0,
  "softening": 1.0,
  "nuclei": [],
  "interaction": {"type": "hubbard", "strength": 1.0},
  "perturbation_seed": 4
}"#;

fn gdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn check_accepts_a_single_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let config = Configuration::new(vec![1, 2, 3]).unwrap();
    let d = slater_gdm(&config, 4, tag_site_pairs()).unwrap();
    let gdm_path = dir.path().join("det.json");
    write(&gdm_path, &io::gdm_to_json(&d).unwrap());

    let out = gdm(&["check", "--gdm", gdm_path.to_str().unwrap(), "--oracle"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("verdict: pass"));
    assert!(stdout.contains("configuration [1, 2, 3]"));
}

#[test]
fn check_flags_the_star_pattern_only_with_the_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    // saturated pairs (1,2), (1,3), (1,4): passes every cheap rule, no
    // single three-electron configuration produces it
    let mut m = CMat::zeros((6, 6));
    for flat in [1usize, 2, 4] {
        m[(flat - 1, flat - 1)] = Complex64::new(1.0, 0.0);
    }
    let d = Gdm::from_matrix(m, 3, tag_site_pairs()).unwrap();
    let gdm_path = dir.path().join("star.json");
    write(&gdm_path, &io::gdm_to_json(&d).unwrap());

    let lenient = gdm(&["check", "--gdm", gdm_path.to_str().unwrap()]);
    assert_eq!(lenient.status.code(), Some(0));

    let out_dir = dir.path().join("report");
    let strict = gdm(&[
        "check",
        "--gdm",
        gdm_path.to_str().unwrap(),
        "--oracle",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&strict.stdout);
    assert_eq!(strict.status.code(), Some(1), "stdout: {stdout}");
    assert!(stdout.contains("generability   FAIL"));
    assert!(stdout.contains("verdict: fail"));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["generability"]["generable"], serde_json::json!(false));
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn malformed_model_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("bad.json");
    write(&model_path, r#"{"n_sites": "three"}"#);
    let out_dir = dir.path().join("out");

    let out = gdm(&[
        "solve",
        "--model",
        model_path.to_str().unwrap(),
        "--electrons",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "failed run must not leave artifacts");
}

#[test]
fn repeated_runs_emit_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("hub3.json");
    write(&model_path, HUB3);

    let run = |name: &str| -> Vec<u8> {
        let out_dir = dir.path().join(name);
        let out = gdm(&[
            "propagate",
            "--model",
            model_path.to_str().unwrap(),
            "--electrons",
            "2",
            "--epsilon",
            "0.2",
            "--dt",
            "0.02",
            "--t-final",
            "5",
            "--sample-every",
            "50",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out_dir.join("manifest.json").exists());
        std::fs::read(out_dir.join("trajectory.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn solve_exit_code_tracks_the_block_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("hub3.json");
    write(&model_path, HUB3);
    let out_dir = dir.path().join("out");

    let out = gdm(&[
        "solve",
        "--model",
        model_path.to_str().unwrap(),
        "--electrons",
        "3",
        "--epsilon",
        "0.15",
        "--lambda-steps",
        "50",
        "--states",
        "6",
        "--candidates",
        "5",
        "--oracle",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let block: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("lowest_block.json")).unwrap())
            .unwrap();
    let representable = block["representable"].as_bool().unwrap();
    let expected = if representable { 0 } else { 1 };
    assert_eq!(out.status.code(), Some(expected));

    // curve labels are 1-based in artifacts and every candidate carries a
    // deviation when the oracle is on
    let curves = std::fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    assert!(curves.starts_with("lambda,tracked_index,energy,crossing_flag\n"));
    assert!(curves.lines().nth(1).unwrap().split(',').nth(1) == Some("1"));
    let solutions: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("solutions.json")).unwrap())
            .unwrap();
    for sol in solutions.as_array().unwrap() {
        assert!(sol["deviation"].is_number());
        assert!(sol["fci_energy"].is_number());
    }
}
