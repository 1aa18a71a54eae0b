//! End-to-end checks of the `atsp` binary: subcommand output shapes,
//! determinism, the trace flag, and the exit-code contract.

use std::process::{Command, Output};

fn atsp(args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_atsp"));
    cmd.args(args);
    match stdin {
        Some(text) => {
            use std::io::Write;
            cmd.stdin(std::process::Stdio::piped());
            cmd.stdout(std::process::Stdio::piped());
            cmd.stderr(std::process::Stdio::piped());
            let mut child = cmd.spawn().expect("spawn");
            child
                .stdin
                .as_mut()
                .unwrap()
                .write_all(text.as_bytes())
                .unwrap();
            child.wait_with_output().expect("wait")
        }
        None => cmd.output().expect("run"),
    }
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_solve_roundtrip() {
    let gen = atsp(&["generate", "--kind", "random", "--n", "5", "--seed", "3"], None);
    assert!(gen.status.success());
    let inst = stdout(&gen);
    let solve = atsp(&["solve", "-"], Some(&inst));
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&solve)).unwrap();
    assert_eq!(rep["n"], 5);
    assert!(rep["ratio"].is_string());
    // Byte-deterministic output for identical input and flags.
    let solve2 = atsp(&["solve", "-"], Some(&inst));
    assert_eq!(stdout(&solve), stdout(&solve2));
}

#[test]
fn tsplib_hk_and_human_flag() {
    let gen = atsp(
        &["generate", "--kind", "random", "--n", "4", "--seed", "1", "--format", "tsplib"],
        None,
    );
    assert!(gen.status.success());
    let inst = stdout(&gen);
    assert!(inst.contains("FULL_MATRIX"));
    let hk = atsp(&["hk", "-", "--human"], Some(&inst));
    assert!(hk.status.success());
    let rep: serde_json::Value = serde_json::from_str(&stdout(&hk)).unwrap();
    assert!(rep["value"]["exact"].is_string());
    assert!(rep["value"]["approx"].is_number());
}

#[test]
fn dual_and_backbone_run() {
    let gen = atsp(&["generate", "--kind", "single-set-vertebrate"], None);
    let inst = stdout(&gen);
    let dual = atsp(&["dual", "-"], Some(&inst));
    assert!(dual.status.success());
    let backbone = atsp(&["backbone", "-"], Some(&inst));
    assert!(backbone.status.success());
    let rep: serde_json::Value = serde_json::from_str(&stdout(&backbone)).unwrap();
    assert!(rep["backbone_walk"].is_array());
}

#[test]
fn trace_flag_writes_json_lines() {
    let dir = std::env::temp_dir().join(format!("atsp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let trace_path = dir.join("trace.jsonl");
    let gen = atsp(&["generate", "--kind", "random", "--n", "6", "--seed", "9"], None);
    let inst = stdout(&gen);
    let solve = atsp(
        &["solve", "-", "--trace", trace_path.to_str().unwrap()],
        Some(&inst),
    );
    assert!(solve.status.success());
    let trace = std::fs::read_to_string(&trace_path).unwrap();
    assert!(!trace.trim().is_empty());
    for line in trace.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.is_object());
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    // Parse error -> 2.
    let bad = atsp(&["solve", "-"], Some("DIMENSION: 3\nEDGE_WEIGHT_SECTION\n0 1\n"));
    assert_eq!(bad.status.code(), Some(2));
    // Solve error (not strongly connected) -> 1.
    let disconnected = r#"{"n": 2, "edges": [{"tail": 0, "head": 1, "w": "1"}]}"#;
    let out = atsp(&["solve", "-"], Some(disconnected));
    assert_eq!(out.status.code(), Some(1));
    // Unknown generator kind -> 1.
    let out = atsp(&["generate", "--kind", "nope"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_compare_rows_hold() {
    let out = atsp(
        &["oracle-compare", "--n-min", "3", "--n-max", "4", "--seeds", "3"],
        None,
    );
    assert!(out.status.success());
    let text = stdout(&out);
    let mut rows = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["ok"], true);
        rows += 1;
    }
    assert_eq!(rows, 6);
}
