use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_affapprox"));
    c.env_remove("AFFAPPROX_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SAWTOOTH: &str = r#"{"space": {"kind": "lq", "q": 2, "dim": 1}, "a": 0, "b": 1, "m": 2,
    "values": [[0], [0.25], [0.5], [0.25], [0]]}"#;

#[test]
fn energy_passes_on_a_lipschitz_curve() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "g.json", SAWTOOTH);
    let out = run(&["energy", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["energies"], serde_json::json!([0.0, 1.0, 1.0]));
    assert_eq!(report["pass"], true);
}

#[test]
fn failed_gain_bound_exits_one() {
    // A tent into ℓ_∞^2: E_1 = 1 but the gain bound asks for 1 + 2^{-4}.
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "tent.json",
        r#"{"space": {"kind": "lq", "q": "inf", "dim": 2}, "a": 0, "b": 1, "m": 1,
            "values": [[0, 0], [0.5, 0.5], [1, 0]]}"#,
    );
    let out = run(&["energy", "--input", &input, "--p", "2", "--K", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let short = write(
        dir.path(),
        "short.json",
        r#"{"space": {"kind": "lq", "q": 2, "dim": 1}, "a": 0, "b": 1, "m": 2, "values": [[0], [1]]}"#,
    );
    let garbage = write(dir.path(), "garbage.json", "{ not json");
    let missing = dir.path().join("missing.json");
    for input in [short.as_str(), garbage.as_str(), missing.to_str().unwrap()] {
        let out = run(&["energy", "--input", input]);
        assert_eq!(out.status.code(), Some(2), "{input}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(run(&["counterexample", "--lemma", "44", "--m", "3", "--p", "2"]).status.code(), Some(2));
    assert_eq!(run(&["net", "--n", "2", "--delta", "-1"]).status.code(), Some(2));
}

#[test]
fn bounds_csv() {
    let out = run(&["bounds", "--n", "1", "--p", "2", "--K", "1", "--eps", "0.25", "--variant", "theorem,lemma41"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], "1,2,1,0.25,theorem,-8192");
    assert!(lines[2].starts_with("1,2,1,0.25,interval,"));
}

#[test]
fn counterexample_sweeps_pass() {
    for args in [
        ["counterexample", "--lemma", "41", "--m", "5", "--p", "2", "--n", "1", "--sweep"],
        ["counterexample", "--lemma", "42", "--m", "5", "--p", "3", "--n", "4", "--sweep"],
        ["counterexample", "--lemma", "43", "--m", "8", "--p", "2", "--n", "2", "--sweep"],
    ] {
        assert_eq!(run(&args).status.code(), Some(0), "{args:?}");
    }
}

#[test]
fn fit_recovers_an_affine_map() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s.json",
        r#"{"space": {"kind": "lq", "q": 2, "dim": 1},
            "points": [[0, 0], [1, 0], [0, 1], [1, 1]],
            "values": [[1], [3], [0], [2]]}"#,
    );
    let out = run(&["fit", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["sup_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("cube.json");
    let ok = bin()
        .args(["generate", "random-cube", "--n", "2", "--level", "4", "--seed", "3", "--output"])
        .arg(&cube)
        .status()
        .unwrap();
    assert!(ok.success());
    let cube = cube.to_str().unwrap();
    let args = ["r-search", "--input", cube, "--eps", "0.05", "--levels", "4", "--exhaustive"];
    let one = bin().args(args).args(["--parallelism", "1"]).output().unwrap();
    let four = bin().args(args).args(["--parallelism", "4"]).output().unwrap();
    let env = bin().args(args).args(["--parallelism", "1"]).env("AFFAPPROX_THREADS", "3").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert!(!one.stdout.is_empty());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, env.stdout);

    let bad = bin().args(args).env("AFFAPPROX_THREADS", "0").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
