//! Black-box tests driving the compiled `lipfree` binary: output shapes,
//! exit codes, determinism, and the --out / stdin-file plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn lipfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipfree"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_json(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// Raw 3-point path 0 - 1 - 2 with d(0,2) = 2; normalized it is the
/// 4-point space with d(1,2) = 1/2 and everything else at 1.
fn half_pair_instance() -> Value {
    json!({"instance": {"matrix": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}})
}

fn with(mut base: Value, key: &str, value: Value) -> Value {
    base.as_object_mut().unwrap().insert(key.to_string(), value);
    base
}

#[test]
fn norm_reports_the_unit_point_mass() {
    let dir = tempfile::tempdir().unwrap();
    let input = with(half_pair_instance(), "moments", json!({"1": 1.0}));
    let path = write_json(dir.path(), "in.json", &input);

    let out = lipfree(&["norm", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["value"], json!(1.0));
    assert_eq!(v["primal_cost"], json!(1.0));
    assert_eq!(v["dual_value"], json!(1.0));
    assert_eq!(v["witness"].as_array().unwrap().len(), 4);
    assert_eq!(v["witness"][0], json!(0.0));
    assert!(v["plan"].is_array());
    assert!(v.get("atoms").is_none());
}

#[test]
fn ideal_norm_shrinks_to_the_escape_distance() {
    let dir = tempfile::tempdir().unwrap();
    let input = with(
        with(half_pair_instance(), "moments", json!({"1": 1.0})),
        "carrier",
        json!([1]),
    );
    let path = write_json(dir.path(), "in.json", &input);

    let out = lipfree(&["norm", "--ideal", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["value"], json!(0.5));
    assert_eq!(v["primal_cost"], json!(0.5));
    assert_eq!(v["carrier"], json!([1]));
    // The witness vanishes off the carrier.
    assert_eq!(v["witness"][2], json!(0.0));
    assert_eq!(v["witness"][3], json!(0.0));
}

#[test]
fn rad_emits_the_full_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = with(half_pair_instance(), "carrier", json!([1]));
    let path = write_json(dir.path(), "in.json", &input);

    let out = lipfree(&["rad", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["rad"], json!([0.0, 0.5, 0.0, 0.0]));
    assert_eq!(v["size"], json!(4));
}

#[test]
fn lift_certificate_matches_the_restricted_norm() {
    let dir = tempfile::tempdir().unwrap();
    let input = with(
        with(half_pair_instance(), "moments", json!({"1": 0.75, "2": -0.25})),
        "carrier",
        json!([1, 2]),
    );
    let path = write_json(dir.path(), "in.json", &input);

    let out = lipfree(&["lift", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let checks = v["asserted_inequalities"].as_array().unwrap();
    assert_eq!(checks.len(), 2);
    assert!(checks.iter().all(|c| c["ok"] == json!(true)));
    assert!(
        (v["outputs"]["cost"].as_f64().unwrap()
            - v["outputs"]["restricted_norm"].as_f64().unwrap())
        .abs()
            <= 1e-6
    );
}

#[test]
fn decompose_certifies_and_rejects_large_norms() {
    let dir = tempfile::tempdir().unwrap();
    let ok_input = with(
        with(half_pair_instance(), "moments", json!({"1": 0.4})),
        "carrier",
        json!([1, 2]),
    );
    let ok_path = write_json(dir.path(), "ok.json", &ok_input);
    let out = lipfree(&["decompose", "--c", "0.9", "--instance", ok_path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["asserted_inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["ok"] == json!(true)));
    assert_eq!(v["inputs"]["c"], json!(0.9));

    // Norm 2 >= 1: precondition violation, not a check failure.
    let big_input = with(
        with(half_pair_instance(), "moments", json!({"1": 2.0})),
        "carrier",
        json!([1, 2]),
    );
    let big_path = write_json(dir.path(), "big.json", &big_input);
    let out = lipfree(&["decompose", "--c", "0.9", "--instance", big_path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(out.stdout.is_empty());

    // c outside (0, 1] is an input error too.
    let out = lipfree(&["decompose", "--c", "1.5", "--instance", ok_path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn masscheck_reports_failed_inequalities_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Mass 1000 over a ball with radius floor 1: the 4/theta bound is
    // decisively violated, so the certificate must say so and exit 1.
    let input = with(
        with(half_pair_instance(), "atoms", json!({"1": 1000.0})),
        "carrier",
        json!([1, 2]),
    );
    let path = write_json(dir.path(), "in.json", &input);

    let out = lipfree(&["masscheck", "--p", "1", "--r", "0.4", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let failed: Vec<&str> = v["asserted_inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["ok"] == json!(false))
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"ball-mass-at-most-four-over-theta"), "{failed:?}");
    assert!(failed.contains(&"combined-cost-below-one"));

    // A modest separated family passes the same gauntlet.
    let calm = with(
        with(half_pair_instance(), "atoms", json!({"1": 0.2})),
        "carrier",
        json!([1, 2]),
    );
    let calm_path = write_json(dir.path(), "calm.json", &calm);
    let out = lipfree(&["masscheck", "--p", "1", "--r", "0.4", "--instance", calm_path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn rebalance_cancels_an_overlapping_pair() {
    let dir = tempfile::tempdir().unwrap();
    let input = with(
        with(half_pair_instance(), "atoms", json!({"1": 0.5, "2": -0.25})),
        "carrier",
        json!([1, 2]),
    );
    let path = write_json(dir.path(), "in.json", &input);

    let out = lipfree(&["rebalance", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["outputs"]["steps"], json!(1));
    assert_eq!(v["outputs"]["transfers"][0]["from"], json!(1));
    assert_eq!(v["outputs"]["transfers"][0]["to"], json!(2));
    assert_eq!(v["outputs"]["atoms"], json!({"1": 0.25}));
    assert!(v["asserted_inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["ok"] == json!(true)));
}

#[test]
fn operator_scales_moments_with_exact_supports() {
    let dir = tempfile::tempdir().unwrap();
    let input = with(half_pair_instance(), "moments", json!({"1": 0.4, "2": 0.4}));
    let path = write_json(dir.path(), "in.json", &input);

    let out = lipfree(&[
        "operator",
        "--set",
        "1",
        "--theta",
        "0.6",
        "--instance",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let weights = v["outputs"]["weights"].as_array().unwrap();
    assert_eq!(weights.len(), 4);
    assert_eq!(weights[1], json!(1.0));
    assert_eq!(weights[0], json!(0.0));
    // Point 2 sits at distance 1/2 from the set: weight 2 - 2(1/2)/0.6.
    let w2 = weights[2].as_f64().unwrap();
    assert!(w2 > 0.0 && w2 < 1.0);
    assert_eq!(v["outputs"]["moments"]["1"], json!(0.4));
    assert!(v["asserted_inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["ok"] == json!(true)));
}

#[test]
fn random_is_deterministic_and_feeds_back_in() {
    let dir = tempfile::tempdir().unwrap();
    let once = lipfree(&["random", "--n", "5", "--generator", "clustered", "--seed", "41"]);
    let twice = lipfree(&["random", "--n", "5", "--generator", "clustered", "--seed", "41"]);
    assert_eq!(exit_code(&once), 0);
    assert_eq!(once.stdout, twice.stdout, "same seed must give identical bytes");

    let other = lipfree(&["random", "--n", "5", "--generator", "clustered", "--seed", "42"]);
    assert_ne!(once.stdout, other.stdout, "different seeds should differ");

    // The emitted file is a valid instance for every other subcommand.
    let path = dir.path().join("random.json");
    std::fs::write(&path, &once.stdout).unwrap();
    let v = stdout_json(&once);
    assert_eq!(v["generator"], json!("clustered"));
    assert_eq!(v["instance"]["matrix"].as_array().unwrap().len(), 5);

    let mut input: Value = v.clone();
    input
        .as_object_mut()
        .unwrap()
        .insert("moments".to_string(), json!({"2": 1.0, "4": -1.0}));
    let in_path = write_json(dir.path(), "roundtrip.json", &input);
    let norm = lipfree(&["norm", "--instance", in_path.to_str().unwrap()]);
    assert_eq!(exit_code(&norm), 0, "{}", String::from_utf8_lossy(&norm.stderr));
    let nv = stdout_json(&norm);
    assert!(nv["value"].as_f64().unwrap() > 0.0);

    let bad = lipfree(&["random", "--n", "0"]);
    assert_eq!(exit_code(&bad), 2);
    let bad_kind = lipfree(&["random", "--n", "3", "--generator", "moebius"]);
    assert_eq!(exit_code(&bad_kind), 2);
}

#[test]
fn verify_suite_passes_and_is_byte_stable() {
    let once = lipfree(&["verify", "--trials", "2", "--seed", "9"]);
    assert_eq!(exit_code(&once), 0, "{}", String::from_utf8_lossy(&once.stderr));
    let twice = lipfree(&["verify", "--trials", "2", "--seed", "9"]);
    assert_eq!(once.stdout, twice.stdout, "reports must be byte-identical");

    let v = stdout_json(&once);
    assert_eq!(v["schema"], json!(1));
    assert_eq!(v["summary"]["failed"], json!(0));
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
    assert!(v.get("duration").is_none(), "wall-clock time must stay out of reports");
}

#[test]
fn verify_runs_on_a_provided_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "in.json", &half_pair_instance());
    let out = lipfree(&["verify", "--trials", "3", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["schema"], json!(1));
    assert_eq!(v["instance"]["generator"], json!("file"));
    assert_eq!(v["summary"]["failed"], json!(0));
    assert!(v["records"].as_array().unwrap().len() > 20);

    let zero = lipfree(&["verify", "--trials", "0", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&zero), 2);
}

#[test]
fn corrupted_matrices_are_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let input = json!({
        "instance": {"matrix": [[0, 1, 3], [1, 0, 1], [3, 1, 0]]},
        "moments": {"1": 1.0}
    });
    let path = write_json(dir.path(), "in.json", &input);
    let out = lipfree(&["norm", "--instance", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("triangle"));
}

#[test]
fn missing_pieces_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let no_moments = write_json(dir.path(), "a.json", &half_pair_instance());
    assert_eq!(exit_code(&lipfree(&["norm", "--instance", no_moments.to_str().unwrap()])), 2);

    let no_file = lipfree(&["norm"]);
    assert_eq!(exit_code(&no_file), 2);

    let missing = lipfree(&["norm", "--instance", "/nonexistent/x.json"]);
    assert_eq!(exit_code(&missing), 2);

    let basepoint_mass = with(half_pair_instance(), "moments", json!({"0": 1.0}));
    let bp = write_json(dir.path(), "bp.json", &basepoint_mass);
    assert_eq!(exit_code(&lipfree(&["norm", "--instance", bp.to_str().unwrap()])), 2);

    let unknown_flag = lipfree(&["norm", "--frobnicate"]);
    assert_eq!(exit_code(&unknown_flag), 2);
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let input = with(half_pair_instance(), "carrier", json!([1, 2]));
    let path = write_json(dir.path(), "in.json", &input);
    let out_path = dir.path().join("result.json");

    let to_stdout = lipfree(&["rad", "--instance", path.to_str().unwrap()]);
    let to_file = lipfree(&[
        "rad",
        "--instance",
        path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&to_file), 0);
    assert!(to_file.stdout.is_empty(), "--out silences stdout");
    assert_eq!(std::fs::read(&out_path).unwrap(), to_stdout.stdout);
}
