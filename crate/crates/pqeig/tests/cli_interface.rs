//! End-to-end tests of the CLI binary: file schemas, lossless round-trips,
//! flag/config precedence and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pqeig"))
}

/// Minimal JSON well-formedness check (objects, arrays, strings, numbers,
/// booleans); panics with context on malformed input.
fn assert_valid_json(text: &str) {
    fn skip_ws(b: &[u8], mut i: usize) -> usize {
        while i < b.len() && (b[i] as char).is_ascii_whitespace() {
            i += 1;
        }
        i
    }
    fn value(b: &[u8], i: usize) -> usize {
        let i = skip_ws(b, i);
        match b.get(i) {
            Some(b'{') => {
                let mut i = skip_ws(b, i + 1);
                if b.get(i) == Some(&b'}') {
                    return i + 1;
                }
                loop {
                    i = string(b, skip_ws(b, i));
                    i = skip_ws(b, i);
                    assert_eq!(b.get(i), Some(&b':'), "expected ':' at {i}");
                    i = value(b, i + 1);
                    i = skip_ws(b, i);
                    match b.get(i) {
                        Some(b',') => i += 1,
                        Some(b'}') => return i + 1,
                        other => panic!("expected ',' or '}}' at {i}, got {other:?}"),
                    }
                }
            }
            Some(b'[') => {
                let mut i = skip_ws(b, i + 1);
                if b.get(i) == Some(&b']') {
                    return i + 1;
                }
                loop {
                    i = value(b, i);
                    i = skip_ws(b, i);
                    match b.get(i) {
                        Some(b',') => i += 1,
                        Some(b']') => return i + 1,
                        other => panic!("expected ',' or ']' at {i}, got {other:?}"),
                    }
                }
            }
            Some(b'"') => string(b, i),
            Some(b't') => i + check_lit(b, i, "true"),
            Some(b'f') => i + check_lit(b, i, "false"),
            Some(b'n') => i + check_lit(b, i, "null"),
            Some(c) if c.is_ascii_digit() || *c == b'-' => {
                let mut j = i + 1;
                while j < b.len() && matches!(b[j], b'0'..=b'9' | b'.' | b'e' | b'E' | b'+' | b'-')
                {
                    j += 1;
                }
                std::str::from_utf8(&b[i..j])
                    .unwrap()
                    .parse::<f64>()
                    .unwrap_or_else(|_| panic!("bad number at {i}: {:?}", text_slice(b, i, j)));
                j
            }
            other => panic!("unexpected token at {i}: {other:?}"),
        }
    }
    fn string(b: &[u8], i: usize) -> usize {
        assert_eq!(b.get(i), Some(&b'"'), "expected string at {i}");
        let mut j = i + 1;
        while j < b.len() {
            match b[j] {
                b'\\' => j += 2,
                b'"' => return j + 1,
                c if c < 0x20 => panic!("raw control byte {c:#x} in string at {j}"),
                _ => j += 1,
            }
        }
        panic!("unterminated string starting at {i}");
    }
    fn check_lit(b: &[u8], i: usize, lit: &str) -> usize {
        assert_eq!(&b[i..i + lit.len()], lit.as_bytes(), "bad literal at {i}");
        lit.len()
    }
    fn text_slice(b: &[u8], i: usize, j: usize) -> String {
        String::from_utf8_lossy(&b[i..j]).into_owned()
    }
    let bytes = text.as_bytes();
    let end = value(bytes, 0);
    assert_eq!(skip_ws(bytes, end), bytes.len(), "trailing garbage after JSON value");
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pqeig-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_solve(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let json = dir.join("report.json");
    let csv = dir.join("fields.csv");
    let mut cmd = bin();
    cmd.args(["solve", "--dim", "1", "--n", "30", "--seed", "9"])
        .args(["--json_out", json.to_str().unwrap(), "--csv_out", csv.to_str().unwrap()])
        .args(extra);
    let status = cmd.status().unwrap();
    assert!(status.success());
    (json, csv)
}

#[test]
fn solve_report_schema_and_roundtrip() {
    let dir = tmp("schema");
    let (json, csv) = run_solve(&dir, &[]);

    let text = std::fs::read_to_string(&json).unwrap();
    assert_valid_json(&text);
    for key in [
        "lambda",
        "iterations",
        "converged",
        "termination",
        "kkt_u",
        "kkt_v",
        "p",
        "q",
        "alpha",
        "beta",
        "dim",
        "n",
        "seed",
    ] {
        assert!(text.contains(&format!("\"{key}\":")), "missing key {key} in {text}");
    }
    // lambda parses back and is positive
    let lambda: f64 = text
        .lines()
        .find(|l| l.contains("\"lambda\""))
        .and_then(|l| l.split(':').nth(1))
        .map(|v| v.trim().trim_end_matches(',').parse().unwrap())
        .unwrap();
    assert!(lambda > 0.0);

    // CSV: header + one row per interior node, values round-trip bitwise
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,u,v");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 30);
    let mut prev_x = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 3);
        // print -> parse -> print is the identity at 17 significant digits
        for cell in &cells {
            let value: f64 = cell.parse().unwrap();
            assert_eq!(format!("{value:.16e}"), **cell, "row {i} not lossless");
        }
        let x: f64 = cells[0].parse().unwrap();
        assert!(x > prev_x && x < 1.0, "coordinates strictly increasing inside (0, 1)");
        prev_x = x;
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn solve_2d_csv_has_two_coordinates() {
    let dir = tmp("2d");
    let json = dir.join("r.json");
    let csv = dir.join("f.csv");
    let status = bin()
        .args(["solve", "--dim", "2", "--n", "8", "--seed", "3"])
        .args(["--json_out", json.to_str().unwrap(), "--csv_out", csv.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,u,v");
    assert_eq!(lines.count(), 64);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_with_flag_override() {
    let dir = tmp("config");
    let cfg_path = dir.join("base.cfg");
    std::fs::write(&cfg_path, "# base configuration\ndim=1\nn=25\nseed=4\ntol_kkt=1e-5\n").unwrap();
    let json = dir.join("report.json");
    let csv = dir.join("fields.csv");
    let status = bin()
        .args(["solve", "--config", cfg_path.to_str().unwrap(), "--n", "40"])
        .args(["--json_out", json.to_str().unwrap(), "--csv_out", csv.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&json).unwrap();
    assert!(text.contains("\"n\": 40"), "flag should override config: {text}");
    assert!(text.contains("\"seed\": 4"));
    // default exponents: the first Dirichlet Laplacian eigenvalue
    let lambda: f64 = text
        .lines()
        .find(|l| l.contains("\"lambda\""))
        .and_then(|l| l.split(':').nth(1))
        .map(|v| v.trim().trim_end_matches(',').parse().unwrap())
        .unwrap();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    assert!((lambda - pi2).abs() / pi2 < 0.01, "lambda {lambda} vs pi^2");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn inadmissible_exponents_exit_code_2() {
    let output = bin()
        .args(["solve", "--p", "2", "--q", "2", "--alpha", "1", "--beta", "0.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("alpha/p + beta/q"), "stderr: {stderr}");
}

#[test]
fn unknown_key_and_missing_subcommand_exit_code_2() {
    let output = bin().args(["solve", "--bogus", "1"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin().output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin().args(["solve", "--config", "/no/such/file.cfg"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn oracle_prints_reference_values() {
    let output = bin().args(["oracle", "--n", "20"]).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert_valid_json(&text);
    assert!(text.contains("\"pi_p\""));
    assert!(text.contains("\"plap1d_lambda1\""));
    assert!(text.contains("\"linear_lambda1\""));
    let pi_p: f64 = text
        .lines()
        .find(|l| l.contains("pi_p"))
        .and_then(|l| l.split(':').nth(1))
        .map(|v| v.trim().trim_end_matches(',').parse().unwrap())
        .unwrap();
    assert!((pi_p - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn sweep_csv_schema_and_roundtrip() {
    let dir = tmp("sweep");
    let csv = dir.join("sweep.csv");
    let status = bin()
        .args(["sweep", "--p", "2.0:2.5:3", "--theta", "0.5", "--n", "20", "--seed", "2"])
        .args(["--sweep_out", csv.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "p,q,alpha,beta,lambda,iterations,kkt_u,kkt_v,converged");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 9);
        let p: f64 = cols[0].parse().unwrap();
        let q: f64 = cols[1].parse().unwrap();
        let alpha: f64 = cols[2].parse().unwrap();
        let beta: f64 = cols[3].parse().unwrap();
        assert_eq!(q.to_bits(), p.to_bits(), "q follows p by default");
        assert!((alpha / p + beta / q - 1.0).abs() < 1e-12);
        let lambda: f64 = cols[4].parse().unwrap();
        assert!(lambda.is_finite() && lambda > 0.0);
    }
    // q = p at every point: theta chart keeps admissibility by construction
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_writes_summary_and_exits_zero() {
    let dir = tmp("verify");
    let json = dir.join("verify.json");
    let status = bin()
        .args(["verify", "--trials", "5000", "--concavity_trials", "200", "--n", "40"])
        .args(["--n_starts", "2", "--seed", "1", "--verify_out", json.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&json).unwrap();
    assert_valid_json(&text);
    for key in ["jensen_min_gap", "concavity_max_violation", "simplicity", "checks", "pass"] {
        assert!(text.contains(&format!("\"{key}\"")), "missing {key}");
    }
    assert!(text.contains("\"simplicity\": \"simple\""));
    assert!(text.contains("\"pass\": true"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn identical_configs_are_byte_identical_including_sweep() {
    let dir = tmp("determinism");
    let mut outputs = Vec::new();
    for run in 0..2 {
        let csv = dir.join(format!("sweep-{run}.csv"));
        let status = bin()
            .args(["sweep", "--p", "2.0:2.2:2", "--n", "15", "--seed", "7"])
            .args(["--sweep_out", csv.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    std::fs::remove_dir_all(&dir).ok();
}
