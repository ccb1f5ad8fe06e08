use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_necklace")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write(dir: &TempDir, name: &str, value: &Value) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn uniform_instance(k: usize, m: &[usize], n: usize) -> Value {
    let measures: Vec<Value> = (0..n).map(|_| json!({"breakpoints": [[0.0, 1.0]], "values": [1.0]})).collect();
    json!({"k": k, "m": m, "measures": measures})
}

#[test]
fn solve_uniform_halves() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "u.json", &uniform_instance(2, &[1], 1));
    let out = run(&["solve", &inst, "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let cut = v["division"]["cuts"][0][0].as_f64().unwrap();
    assert!((cut - 0.5).abs() < 1e-6);
    assert_eq!(v["report"]["passed"], json!(true));
}

#[test]
fn gen_is_reproducible_and_balanced() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run(&["gen", "--seed", "7", "--n", "3", "--d", "2", "--k", "3", "--out", p(path)]);
        assert_eq!(out.status.code(), Some(0));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: Value = serde_json::from_slice(&ta).unwrap();
    let m: u64 = v["m"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(m, 6);
    for g in v["measures"].as_array().unwrap() {
        let cells = g["values"].as_array().unwrap();
        assert!(cells.iter().all(|c| c.as_f64().unwrap() >= 0.0));
    }
}

#[test]
fn gen_solve_verify_round_trip() {
    let dir = TempDir::new().unwrap();
    for (seed, n, d, k) in [(1, 2, 1, 2), (2, 2, 2, 3), (3, 1, 2, 4)] {
        let inst = dir.path().join(format!("i{seed}.json"));
        let div = dir.path().join(format!("d{seed}.json"));
        let args = ["gen", "--seed", &seed.to_string(), "--n", &n.to_string(), "--d", &d.to_string(), "--k", &k.to_string(), "--out", p(&inst)];
        assert_eq!(run(&args).status.code(), Some(0));
        let out = run(&["solve", p(&inst), "--out", p(&div)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let out = run(&["verify", p(&inst), p(&div), "--json"]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(stdout_json(&out)["passed"], json!(true));
    }
}

#[test]
fn two_by_two_factorization_instance() {
    // n = 2, d = 2, k = 4 with four cuts on the second axis.
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("g.json");
    assert_eq!(run(&["gen", "--seed", "5", "--n", "2", "--d", "2", "--k", "4", "--out", p(&inst)]).status.code(), Some(0));
    let mut v: Value = serde_json::from_slice(&std::fs::read(&inst).unwrap()).unwrap();
    v["m"] = json!([2, 4]);
    let inst = write(&dir, "g24.json", &v);
    let out = run(&["solve", &inst, "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert!(r["report"]["residual_norm"].as_f64().unwrap() <= 1e-4);
    assert_eq!(r["report"]["cut_counts"], json!([2, 4]));
}

#[test]
fn invalid_instances_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad_m = write(&dir, "m.json", &uniform_instance(2, &[2], 1));
    let out = run(&["solve", &bad_m]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n(k-1)"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\n  \"k\": 2,\n  \"m\": [1,\n}").unwrap();
    let out = run(&["solve", p(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("broken.json:4:1"), "{err}");
}

#[test]
fn exhausted_search_exits_1() {
    let dir = TempDir::new().unwrap();
    // One restart with a budget of one evaluation cannot reach 1e-15.
    let inst = json!({"k": 3, "m": [4], "measures": [
        {"breakpoints": [[0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1]], "values": [5, 0, 1, 0, 3, 0, 0, 1, 0, 0]},
        {"breakpoints": [[0, 0.15, 0.35, 0.6, 0.95, 1]], "values": [0, 2, 0, 1, 7]}]});
    let inst = write(&dir, "hard.json", &inst);
    let out = run(&["solve", &inst, "--restarts", "1", "--budget", "1", "--tol", "1e-15"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_reports_offending_entries() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "two.json", &json!({"k": 2, "m": [2], "measures": [
        {"breakpoints": [[0, 0.5, 1]], "values": [2, 0]},
        {"breakpoints": [[0, 0.5, 1]], "values": [0, 2]}]}));
    let good = write(&dir, "good.json", &json!({"k": 2, "cuts": [[0.25, 0.75]], "labels": [1, 2, 1]}));
    assert_eq!(run(&["verify", &inst, &good]).status.code(), Some(0));

    let edited = write(&dir, "edited.json", &json!({"k": 2, "cuts": [[0.25, 0.75]], "labels": [1, 2, 2]}));
    let out = run(&["verify", &inst, &edited, "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let r = stdout_json(&out);
    assert_eq!(r["passed"], json!(false));
    let bad: Vec<&Value> = r["deviations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|d| d["deviation"].as_f64().unwrap().abs() > 1e-6)
        .collect();
    assert!(bad.iter().all(|d| d["measure"] == json!(2)), "{bad:?}");
    assert_eq!(bad.len(), 2);

    let degenerate = write(&dir, "deg.json", &json!({"k": 2, "cuts": [[0.5, 0.5]], "labels": [1, 2, 2]}));
    let u = write(&dir, "u2.json", &uniform_instance(2, &[2], 2));
    assert_eq!(run(&["verify", &u, &degenerate]).status.code(), Some(0));

    let wrong_dim = write(&dir, "dim.json", &json!({"k": 2, "cuts": [[0.5], []], "labels": [1, 2]}));
    assert_eq!(run(&["verify", &inst, &wrong_dim]).status.code(), Some(2));
}

#[test]
fn complex_reports() {
    let out = run(&["complex", "euler", "--polytope", "simplex:2", "--k", "2", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["direct"], json!("2"));

    let out = run(&["complex", "homology", "--polytope", "prod:simplex:1,simplex:1", "--k", "2", "--json"]);
    assert_eq!(stdout_json(&out)["betti"], json!([0, 0, 7]));

    let out = run(&["complex", "shelling", "--polytope", "cube:2", "--k", "2", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["shelling"]["full_boundary"], json!(7));
    assert_eq!(v["crosscheck"]["top_betti"], json!(7));

    let out = run(&["complex", "action", "--polytope", "square", "--k", "2", "--json"]);
    assert_eq!(stdout_json(&out)["orbits"], json!(20));
    assert_eq!(run(&["complex", "action", "--polytope", "square", "--k", "4"]).status.code(), Some(2));

    let out = run(&["complex", "euler", "--polytope", "square", "--k", "3"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("open question"), "{text}");

    assert_eq!(run(&["complex", "euler", "--polytope", "torus:2", "--k", "2"]).status.code(), Some(2));
    assert_eq!(
        run(&["complex", "homology", "--polytope", "cube:4", "--k", "4", "--max-cells", "100"]).status.code(),
        Some(2)
    );
}

#[test]
fn necklace1d_splits() {
    let out = run(&["necklace1d", "ABAB", "--k", "2", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["split"]["cuts"], json!([2]));
    assert_eq!(v["split"]["assignment"], json!([1, 2]));

    let dir = TempDir::new().unwrap();
    let f = write(&dir, "beads.json", &json!({"beads": [1, 1, 2, 2]}));
    let v = stdout_json(&run(&["necklace1d", &f, "--k", "2", "--json"]));
    assert_eq!(v["split"]["cuts"], json!([1, 3]));

    assert_eq!(run(&["necklace1d", "AAB", "--k", "2"]).status.code(), Some(2));
    assert_eq!(run(&["necklace1d", "aab", "--k", "2"]).status.code(), Some(2));
}
