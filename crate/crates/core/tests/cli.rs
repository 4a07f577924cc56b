use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_permapprox"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).stdin(Stdio::null()).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

const TWO_THIRDS: &str = "2\n0.6666666666666666 0.3333333333333333\n0.3333333333333333 0.6666666666666666\n";

#[test]
fn exact_reads_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    std::fs::write(&path, "2\n0.6 0.4\n0.4 0.6\n").unwrap();
    let o = run(&["exact", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!((v["log_value"].as_f64().unwrap() - 0.52_f64.ln()).abs() < 1e-14);
}

#[test]
fn approx_orders_differ_and_use_stdin() {
    let first = run_stdin(&["approx", "--t2", "unit"], TWO_THIRDS);
    assert_eq!(first.status.code(), Some(0));
    let second = run_stdin(&["approx", "--t2", "unit", "--order", "2"], TWO_THIRDS);
    assert_eq!(second.status.code(), Some(0));
    let (a, b) = (json(&first), json(&second));
    assert_ne!(a["method"], b["method"]);
    assert!(a["log_value"].as_f64().unwrap().is_finite());
}

#[test]
fn output_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = run_stdin(&["project", "--output", out.to_str().unwrap()], "2\n1 2\n3 4\n");
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!(v.is_object());
}

#[test]
fn exit_codes() {
    // Permutation matrix: the determinantal kernel is singular.
    let o = run_stdin(&["approx"], "3\n0 1 0\n0 0 1\n1 0 0\n");
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(run(&["approx", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["approx", "--order", "3"]).status.code(), Some(2));
    let o = run_stdin(&["exact"], "2\n1 2\n");
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.txt");
    assert_eq!(run(&["exact", "--input", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let args = ["simulate", "--n", "6..8:2", "--reps", "3", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["simulate", "--n", "6..8:2", "--reps", "3", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
    let thread_env = bin()
        .args(args)
        .env("PERMAPPROX_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, thread_env.stdout);
}

#[test]
fn simulate_csv_and_json_agree() {
    let csv = run(&["simulate", "--n", "6", "--reps", "4", "--seed", "3"]);
    let jsonl = run(&["simulate", "--n", "6", "--reps", "4", "--seed", "3", "--format", "json"]);
    let csv = stdout(&csv);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let y_col = header.iter().position(|h| *h == "y").unwrap();
    let csv_y: Vec<f64> = lines.map(|l| l.split(',').nth(y_col).unwrap().parse().unwrap()).collect();
    let json_y: Vec<f64> = stdout(&jsonl)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["y"].as_f64().unwrap())
        .collect();
    assert_eq!(csv_y.len(), 4);
    assert_eq!(csv_y.len(), json_y.len());
    // serde_json's default float parser may land one ulp away.
    for (a, b) in csv_y.iter().zip(&json_y) {
        assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn simulate_side_files() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let summary = dir.path().join("summary.csv");
    let o = run(&[
        "simulate",
        "--n",
        "6",
        "--reps",
        "2",
        "--plot",
        plot.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let plot = std::fs::read_to_string(plot).unwrap();
    assert!(plot.starts_with("n,structure,rep,log_x0,log_y"));
    assert_eq!(plot.lines().count(), 3);
    assert!(std::fs::read_to_string(summary).unwrap().lines().count() >= 2);
}

#[test]
fn table2_cell() {
    let o = run(&["table2", "--n", "20", "--rho", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let exact: f64 = row[4].parse().unwrap();
    assert!((exact - 0.6755).abs() < 5e-5, "{out}");
}

#[test]
fn table1_cell() {
    let o = run(&["table1", "--n", "8", "--rho", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let err = v[0]["error_x1e3"].as_f64().unwrap();
    assert!((err - 1.0178).abs() < 0.01);
}

#[test]
fn oracle_passes_and_mutation_fails() {
    let o = run(&["oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(json(&o)["passed"], true);
    let m = run(&["oracle", "--mutate-m"]);
    assert_eq!(m.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&m.stderr).contains("exp_generator"));
}
