use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gapfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapfair")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixtures() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let o = gapfair(&["fixtures", "--out-dir", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let root = dir.path().to_path_buf();
    (dir, root)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn nash_fixture_fails_fef_with_witness() {
    let (_d, root) = fixtures();
    let o = gapfair(&["verify", path(&root.join("mnw-allocation.json")), "--mode", "fef"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("fef: FAIL: agent 1 "), "{out}");
    assert!(out.contains("agent 2 holdings"), "{out}");
    assert!(out.contains("in original units 31/60 vs 31/32"), "{out}");
}

#[test]
fn nash_instance_gets_a_fef_allocation() {
    let (_d, root) = fixtures();
    let out = root.join("div.json");
    let o = gapfair(&["solve-divisible", path(&root.join("mnw-instance.json")), "-o", path(&out), "--trace"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("LP1 feasible"));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"verdict\": \"PASS\""));
    let o = gapfair(&["verify", path(&out), "--mode", "fef"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "fef: PASS\n");
}

#[test]
fn single_good_goes_to_agent_one() {
    let (_d, root) = fixtures();
    let out = root.join("fefx.json");
    let o = gapfair(&["solve-fefx", path(&root.join("single-good-instance.json")), "-o", path(&out), "--trace"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stderr(&o), "iteration 1: agent 1 takes {1} (value 0 -> 1), welfare 1\n");
    let file: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(file["bundles"], serde_json::json!([[1], []]));
    assert_eq!(file["report"]["verdict"], "PASS");
    let o = gapfair(&["verify", path(&out), "--mode", "fefx"]);
    assert_eq!(o.status.code(), Some(0));
    // Integral allocations can also be checked for FEF; this one fails.
    let o = gapfair(&["verify", path(&out), "--mode", "fef"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_random_is_deterministic() {
    let a = gapfair(&["gen-random", "--seed", "7", "-n", "3", "-m", "5"]);
    let b = gapfair(&["gen-random", "--seed", "7", "-n", "3", "-m", "5"]);
    let c = gapfair(&["gen-random", "--seed", "8", "-n", "3", "-m", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!((v["n"].as_u64(), v["m"].as_u64()), (Some(3), Some(5)));
}

#[test]
fn approximate_solver_round_trip() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("r.json");
    let out = dir.path().join("a.json");
    assert!(gapfair(&["gen-random", "--seed", "3", "-n", "3", "-m", "6", "-o", path(&inst)]).status.success());
    let o = gapfair(&["solve-approx-fefx", path(&inst), "--eps", "1/4", "-o", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().contains("\"epsilon\": \"1/4\""));
    let o = gapfair(&["verify", path(&out), "--mode", "apx-fefx", "--eps", "1/4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = gapfair(&["verify", path(&out), "--mode", "apx-fefx"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reduce_knapsack_prints_optimum_and_probes() {
    let dir = TempDir::new().unwrap();
    let k = write(dir.path(), "k.json", r#"{"m": 3, "capacity": 4, "weights": [2, 3, 1], "values": [3, 5, 1]}"#);
    let o = gapfair(&["reduce-knapsack", path(&k)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.ends_with("v* = 6\n"), "{out}");
    assert!(out.contains("values doubled"));
    assert!(out.lines().any(|l| l.starts_with("mu = ") && l.ends_with("(odd)")));
}

#[test]
fn exit_codes() {
    let (_d, root) = fixtures();
    let dir = root.as_path();
    // Malformed JSON reports a position.
    let bad = write(dir, "bad.json", "{\"n\": 1,\n \"m\": x}");
    let o = gapfair(&["solve-fefx", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    // Dimension errors name the field.
    let bad = write(dir, "dim.json", r#"{"n": 1, "m": 2, "budgets": [1], "values": [[1]], "sizes": [[1, 1]]}"#);
    let o = gapfair(&["solve-fefx", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("values"), "{}", stderr(&o));
    // Zero sizes are a precondition violation for the divisible solver.
    let o = gapfair(&["solve-divisible", path(&root.join("single-good-instance.json"))]);
    assert_eq!(o.status.code(), Some(3));
    let o = gapfair(&["solve-approx-fefx", path(&root.join("mnw-instance.json")), "--eps", "1/1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = gapfair(&["solve-approx-fefx", path(&root.join("mnw-instance.json")), "--eps", "half"]);
    assert_eq!(o.status.code(), Some(2));
    // A tampered instance no longer matches the allocation's hash.
    let alloc = root.join("mnw-allocation.json");
    fs::write(root.join("mnw-instance.json"), fs::read_to_string(root.join("single-good-instance.json")).unwrap()).unwrap();
    let o = gapfair(&["verify", path(&alloc), "--mode", "fef"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("instance_hash"));
}
