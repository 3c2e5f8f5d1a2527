use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"{
  "T": 2, "F": 2, "U": 2, "capacity": 3, "cost_server": 2, "cost_cache": 1,
  "sizes": [2, 3],
  "requests": [
    {"user": 1, "index": 1, "content": 1, "origin": 1, "deadline": 2},
    {"user": 2, "index": 1, "content": 2, "origin": 1, "deadline": 1},
    {"user": 2, "index": 2, "content": 1, "origin": 2, "deadline": 2}
  ]
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cachesched")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_file(dir: &TempDir) -> String {
    let p = dir.path().join("tiny.json");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn field(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
        .to_string()
}

#[test]
fn exact_on_tiny() {
    let dir = TempDir::new().unwrap();
    let inst = tiny_file(&dir);
    let plan = dir.path().join("p.json");
    let o = run(&["solve", "--algo", "exact", "--instance", &inst, "--plan", plan.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("algo=exact "));
    assert_eq!(field(&line, "cost"), "12");
    for key in ["lb", "gap", "millis"] {
        field(&line, key);
    }
    assert!(plan.exists());
}

#[test]
fn rcga_cost_matches_verify() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("gen.json");
    let o = run(&[
        "gen",
        "--slots",
        "6",
        "--users",
        "30",
        "--contents",
        "12",
        "--seed",
        "3",
        "--out",
        inst.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["solve", "--algo", "rcga", "--instance", inst.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cost = field(&stdout(&o), "cost");
    let plan = dir.path().join("gen.plan.json");
    assert!(plan.exists());
    let v = run(&["verify", "--instance", inst.to_str().unwrap(), "--plan", plan.to_str().unwrap()]);
    assert!(v.status.success(), "{}", stderr(&v));
    assert_eq!(field(&stdout(&v), "cost"), cost);
    assert_eq!(field(&stdout(&v), "feasible"), "true");
}

#[test]
fn every_algorithm_prints_summary() {
    let dir = TempDir::new().unwrap();
    let inst = tiny_file(&dir);
    for algo in ["rcga", "pbc", "rbc", "exact", "lb"] {
        let plan = dir.path().join(format!("{algo}.json"));
        let o =
            run(&["--threads", "2", "solve", "--algo", algo, "--instance", &inst, "--plan", plan.to_str().unwrap()]);
        assert!(o.status.success(), "{algo}: {}", stderr(&o));
        assert_eq!(field(&stdout(&o), "algo"), algo);
    }
}

#[test]
fn verify_reports_capacity_violation() {
    let dir = TempDir::new().unwrap();
    let inst = tiny_file(&dir);
    let plan = dir.path().join("bad.json");
    fs::write(&plan, r#"{"T": 2, "F": 2, "x": [[1, 1], [0, 0]]}"#).unwrap();
    let o = run(&["verify", "--instance", &inst, "--plan", plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("slot 1"), "{}", stderr(&o));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = run(&["gen", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn user_errors_exit_one() {
    let o = run(&["solve", "--algo", "rcga", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));

    let o = run(&["solve", "--algo", "rcga", "--instance", "/nonexistent/instance.json"]);
    assert_eq!(o.status.code(), Some(1));

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, TINY.replace("\"capacity\": 3,", "")).unwrap();
    let o = run(&["verify", "--instance", bad.to_str().unwrap(), "--plan", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("capacity"), "{}", stderr(&o));

    assert!(run(&["--help"]).status.success());
}

#[test]
fn exact_refuses_large_instance() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("big.json");
    assert!(run(&["gen", "--slots", "5", "--contents", "6", "--users", "5", "--out", inst.to_str().unwrap()])
        .status
        .success());
    let o = run(&["solve", "--algo", "exact", "--instance", inst.to_str().unwrap(), "--limit", "1024"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn export_lp_writes_program() {
    let dir = TempDir::new().unwrap();
    let inst = tiny_file(&dir);
    let out = dir.path().join("tiny.lp");
    let o = run(&["export-lp", "--instance", &inst, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("a_2_1 - x_2_1 + x_1_1 >= 0"));
    assert!(text.contains("Binaries"));
}

fn write_spec(dir: &Path) -> String {
    let spec = r#"{
      "base": {"T": 4, "U": 10, "F": 6, "size_range": [1, 10], "rho": 0.5, "gamma": 0.56, "alpha": 1.0,
               "requests_per_user_range": [1, 10], "cost_server": 10, "cost_cache": 1, "seed": 0},
      "param": "alpha", "values": [0.0, 1.0], "replications": 2, "base_seed": 4, "record_timing": false
    }"#;
    let p = dir.join("spec.json");
    fs::write(&p, spec).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn sweep_writes_reproducible_csv() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(dir.path());
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&["sweep", "--spec", &spec, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read_to_string(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let mut lines = outputs[0].lines();
    assert_eq!(lines.next(), Some("param,value,replication,seed,algo,cost,gap,millis"));
    assert_eq!(lines.count(), 2 * 2 * 4);
}
