use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use specshift::cli::pair_file;
use specshift::linalg::{CMatrix, NormKind};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specshift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(p).expect("golden file")
}

#[test]
fn verify_lk_passes_on_seeded_pair() {
    let out = bin(&[
        "verify-lk",
        "--seed",
        "3",
        "--n",
        "4",
        "--rank",
        "2",
        "--function",
        "psi:3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["pass"], true);
    let oracle = r["oracle"]["re"].as_f64().unwrap();
    let rhs = r["rhs"]["re"].as_f64().unwrap();
    assert!((oracle - rhs).abs() < 1e-6);
}

#[test]
fn function_without_integrability_is_refused() {
    let out = bin(&["verify-lk", "--seed", "1", "--function", "remark43"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(∗)"));
    let out = bin(&["verify-lk", "--seed", "1", "--function", "power:0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_pair_file_is_an_io_error() {
    let out = bin(&[
        "verify-lk",
        "--pair",
        "/nonexistent/pair.json",
        "--function",
        "psi:3",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_tolerance_is_rejected() {
    let out = bin(&["affine-limit", "--seed", "2", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unreachable_tolerance_reports_failure() {
    let out = bin(&[
        "verify-lk",
        "--seed",
        "3",
        "--function",
        "psi:3",
        "--tol",
        "1e-30",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["pass"], false);
}

#[test]
fn equal_operators_give_zero_on_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    let a = CMatrix::from_real_rows(&[vec![-2.0, 1.0], vec![0.0, -3.0]]);
    pair_file(a.clone(), a, NormKind::L2).save(&path).unwrap();
    let out = bin(&[
        "verify-lk",
        "--pair",
        path.to_str().unwrap(),
        "--function",
        "rational:1,1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    for side in ["lhs", "rhs"] {
        assert_eq!(r[side]["re"], 0.0);
        assert_eq!(r[side]["im"], 0.0);
    }
}

#[test]
fn generated_pair_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    let p = path.to_str().unwrap();
    let out = bin(&[
        "gen-instance",
        "--seed",
        "9",
        "--n",
        "3",
        "--rank",
        "2",
        "--out",
        p,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let from_file = bin(&["det-product", "--pair", p]);
    let from_seed = bin(&["det-product", "--seed", "9", "--n", "3", "--rank", "2"]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(from_file.stdout, from_seed.stdout);
    assert_eq!(report(&from_file)["rank"], 2);
}

#[test]
fn every_subcommand_runs_on_a_seeded_pair() {
    let cases: [&[&str]; 5] = [
        &["shift-table", "--seed", "4", "--n", "3"],
        &["det-product", "--seed", "4", "--n", "3", "--rank", "3"],
        &[
            "verify-nonpositive",
            "--seed",
            "4",
            "--n",
            "3",
            "--mode",
            "nonpositive",
            "--function",
            "rational:1,1",
        ],
        &["affine-limit", "--seed", "4", "--n", "3"],
        &["bounds", "--seed", "4", "--n", "3", "--function", "psi:10"],
    ];
    for args in cases {
        let out = bin(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(report(&out)["schema"], 1);
    }
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let args = [
        "shift-table",
        "--seed",
        "7",
        "--n",
        "4",
        "--rank",
        "2",
        "--angle",
        "0.01",
        "--format",
        "csv",
    ];
    let first = bin(&args);
    let second = bin(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(
        String::from_utf8(first.stdout).unwrap(),
        golden("shift_table_seed7.csv")
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let args = [
        "verify-nonpositive",
        "--seed",
        "5",
        "--n",
        "2",
        "--mode",
        "nonpositive",
        "--function",
        "psi:3",
        "--format",
        "csv",
    ];
    let one = Command::new(env!("CARGO_BIN_EXE_specshift"))
        .args(args)
        .env("SPECSHIFT_THREADS", "1")
        .output()
        .unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_specshift"))
        .args(args)
        .env("SPECSHIFT_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.stdout, four.stdout);
}
