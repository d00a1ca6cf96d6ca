use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sicflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sicflow"))
        .args(args)
        .output()
        .expect("failed to launch sicflow")
}

fn stdout_of(args: &[&str]) -> Vec<u8> {
    let out = sicflow(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sicflow-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    files.sort();
    files
}

fn assert_repeatable(args: &[&str]) {
    let mut full = vec!["--no-timestamp", "--seed", "7"];
    full.extend_from_slice(args);
    let a = stdout_of(&full);
    let b = stdout_of(&full);
    assert!(!a.is_empty(), "{args:?} printed nothing");
    assert_eq!(a, b, "{args:?} differs between runs");
}

#[test]
fn analyze_is_repeatable() {
    assert_repeatable(&[
        "analyze",
        "--topology",
        "2",
        "--policy",
        "sic-r",
        "--rates",
        "0.3,0.9",
    ]);
}

#[test]
fn optimize_is_repeatable() {
    assert_repeatable(&["optimize", "--scheme", "tofra", "--policy", "sic-rd"]);
    assert_repeatable(&["optimize", "--scheme", "bp-wb", "--gamma", "2"]);
}

#[test]
fn simulate_is_repeatable() {
    assert_repeatable(&[
        "simulate",
        "--scheme",
        "fmp",
        "--slots",
        "2000",
        "--replications",
        "3",
    ]);
    assert_repeatable(&[
        "simulate",
        "--rates",
        "0.5,0.5",
        "--slots",
        "2000",
        "--replications",
        "2",
        "--max-retransmits",
        "inf",
    ]);
}

#[test]
fn calibrate_is_repeatable() {
    assert_repeatable(&["calibrate"]);
}

#[test]
fn oracle_is_repeatable() {
    assert_repeatable(&["oracle", "--kind", "grid", "--resolution", "0.05"]);
    assert_repeatable(&["oracle", "--kind", "mc", "--samples", "20000"]);
}

#[test]
fn compare_is_repeatable() {
    let run = |name: &str| {
        let dir = scratch_dir(name);
        let out = sicflow(&[
            "--no-timestamp",
            "--seed",
            "3",
            "compare",
            "--topology",
            "1",
            "--gamma",
            "0.5",
            "--scheme",
            "fmp",
            "--scheme",
            "tofra",
            "--policy",
            "ian",
            "--slots",
            "1000",
            "--replications",
            "2",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let tree = read_tree(&dir);
        fs::remove_dir_all(&dir).unwrap();
        tree
    };
    let a = run("a");
    assert!(a.iter().any(|(p, _)| p.ends_with("comparison.csv")));
    assert_eq!(a, run("b"));
}

#[test]
fn json_output_parses() {
    let out = stdout_of(&["--format", "json", "analyze", "--rates", "0.5,0.5"]);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert!(v.get("generated_at_unix").is_some());
    assert!(v["rows"].is_array());
}

#[test]
fn timestamp_comment_is_optional() {
    let with = String::from_utf8(stdout_of(&["calibrate"])).unwrap();
    let without = String::from_utf8(stdout_of(&["--no-timestamp", "calibrate"])).unwrap();
    assert!(with.starts_with("# generated_at_unix="));
    assert!(!without.contains("generated_at_unix"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = sicflow(&["analyze", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_number_has_its_own_exit_code() {
    let out = sicflow(&["analyze", "--rates", "0.5,1.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rates"));
}

#[test]
fn missing_scenario_file_fails() {
    let out = sicflow(&[
        "analyze",
        "--scenario",
        "/nonexistent/net.toml",
        "--rates",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
