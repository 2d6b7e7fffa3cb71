//! End-to-end checks of the command-line surface: subcommands, JSON
//! schemas, exit codes, and output determinism.

use std::io::Write;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gausstv"))
}

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

const SHIFT_PAIR: &str = r#"{
  "mu1": [2.0], "sigma1": [[1.0]],
  "mu2": [0.0], "sigma2": [[1.0]]
}"#;

#[test]
fn compute_emits_estimate_and_exit_zero() {
    let f = write_temp(SHIFT_PAIR);
    let out = bin()
        .args(["compute", "--input", f.path().to_str().unwrap(), "--eps", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let z = v["tv_estimate"].as_f64().unwrap();
    let reference = 0.6826894921370859;
    assert!((z - reference).abs() <= 0.1 * reference);
    assert_eq!(v["eps"].as_f64(), Some(0.1));
}

#[test]
fn compute_diagnostics_and_determinism() {
    let f = write_temp(SHIFT_PAIR);
    let run = || -> Output {
        bin()
            .args([
                "compute",
                "--input",
                f.path().to_str().unwrap(),
                "--eps",
                "0.05",
                "--diagnostics",
            ])
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert!(a.status.success());
    // byte-identical output for identical inputs and flags
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["diagnostics"]["rank_case"].as_str(), Some("full_rank"));
    assert!(v["diagnostics"]["alphabet_size"].as_u64().unwrap() > 0);
}

#[test]
fn compute_reads_stdin() {
    use std::process::Stdio;
    let mut child = bin()
        .args(["compute", "--input", "-", "--eps", "0.1", "--format", "plain"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(SHIFT_PAIR.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("tv_estimate "));
}

#[test]
fn missing_file_exits_two() {
    let out = bin()
        .args(["compute", "--input", "/nonexistent/pair.json", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_json_exits_two_with_position() {
    let f = write_temp("{\"mu1\": [0.0,\n  ,]}");
    let out = bin()
        .args(["compute", "--input", f.path().to_str().unwrap(), "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains(":2:"), "missing line anchor: {msg}");
}

#[test]
fn rejected_input_exits_two() {
    let f = write_temp(
        r#"{"mu1": [0.0], "sigma1": [[-1.0]], "mu2": [0.0], "sigma2": [[1.0]]}"#,
    );
    let out = bin()
        .args(["compute", "--input", f.path().to_str().unwrap(), "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn disprod_subcommand() {
    let f = write_temp(
        r#"{"pairs": [{"p": [0.75, 0.25], "q": [0.5, 0.5]},
                      {"p": [0.75, 0.25], "q": [0.5, 0.5]}]}"#,
    );
    let out = bin()
        .args(["disprod", "--input", f.path().to_str().unwrap(), "--eps", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let z = v["tv_estimate"].as_f64().unwrap();
    assert!((z - 0.3125).abs() <= 0.1 * 0.3125);
}

#[test]
fn oracle_methods() {
    let f = write_temp(SHIFT_PAIR);
    let path = f.path().to_str().unwrap();

    let out = bin()
        .args(["oracle", "--method", "quad1d", "--input", path])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["tv"].as_f64().unwrap() - 0.6826894921370859).abs() < 1e-8);

    let out = bin()
        .args([
            "oracle", "--method", "mc", "--input", path, "--samples", "20000", "--seed", "9",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let (est, se) = (v["tv"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((est - 0.6826894921370859).abs() <= 5.0 * se);

    let out = bin()
        .args(["oracle", "--method", "erf", "--x", "1.0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["erf"].as_f64().unwrap() - 0.8427007929497149).abs() < 1e-12);

    let two_d = write_temp(
        r#"{"mu1": [1.0, 0.0], "sigma1": [[1.0, 0.0], [0.0, 1.0]],
            "mu2": [0.0, 0.0], "sigma2": [[1.0, 0.0], [0.0, 1.0]]}"#,
    );
    let out = bin()
        .args([
            "oracle",
            "--method",
            "grid",
            "--input",
            two_d.path().to_str().unwrap(),
            "--cells",
            "96",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["tv"].as_f64().unwrap() - 0.38292492254802621).abs() < 0.01);
}

#[test]
fn identical_and_disjoint_shortcuts() {
    let same = write_temp(
        r#"{"mu1": [0.5], "sigma1": [[2.0]], "mu2": [0.5], "sigma2": [[2.0]]}"#,
    );
    let out = bin()
        .args(["compute", "--input", same.path().to_str().unwrap(), "--eps", "0.1"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["tv_estimate"].as_f64(), Some(0.0));

    let disjoint = write_temp(
        r#"{"mu1": [0.0, 0.0], "sigma1": [[1.0, 0.0], [0.0, 1.0]],
            "mu2": [0.0, 0.0], "sigma2": [[1.0, 0.0], [0.0, 0.0]]}"#,
    );
    let out = bin()
        .args(["compute", "--input", disjoint.path().to_str().unwrap(), "--eps", "0.1"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["tv_estimate"].as_f64(), Some(1.0));
}
