use std::path::Path;
use std::process::{Command, Output};

use ccucp::instance::builtin_stochastic_instance;
use ccucp::reference_solver::{solve_stochastic_exact, ExactConfig};
use ccucp::sampler::load_scenarios;
use serde_json::Value;
use tempfile::TempDir;

fn ccucp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccucp"))
        .current_dir(dir)
        .env_remove("CCUCP_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ccucp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&read(path)).unwrap()
}

#[test]
fn exact_deterministic_optimum() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(tmp.path(), &["solve", "--exact", "--out", "run"]);
    assert_eq!(stdout.trim(), "objective 191.8");
    let solution = json(tmp.path().join("run/solution.json"));
    let manifest = json(tmp.path().join("run/manifest.json"));
    assert!((solution["objective"].as_f64().unwrap() - 191.8).abs() < 1e-6);
    assert_eq!(solution["manifest"], manifest["id"]);
    assert_eq!(json(tmp.path().join("run/feasibility.json"))["joint"], true);
    assert!(manifest["outputs"]["solution.json"].is_string());
}

#[test]
fn sample_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str| ["sample", "--builtin", "stochastic", "--n", "1000", "--seed", "1", "--regime", "moderate", "--out", out];
    ok(tmp.path(), &args("a"));
    ok(tmp.path(), &args("b"));
    let a = read(tmp.path().join("a/scenarios.csv"));
    assert_eq!(a, read(tmp.path().join("b/scenarios.csv")));
    assert_eq!(a.lines().count(), 1001);
    assert!(a.lines().skip(1).all(|l| l.split(',').count() == 3));
    let meta = json(tmp.path().join("a/scenarios.csv.meta.json"));
    assert_eq!(meta["manifest"], json(tmp.path().join("a/manifest.json"))["id"]);
}

#[test]
fn seed_defaults_to_environment() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["sample", "--n", "20", "--seed", "5", "--out", "flag"]);
    let out = Command::new(env!("CARGO_BIN_EXE_ccucp"))
        .current_dir(tmp.path())
        .env("CCUCP_SEED", "5")
        .args(["sample", "--n", "20", "--out", "env"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read(tmp.path().join("flag/scenarios.csv")), read(tmp.path().join("env/scenarios.csv")));
}

#[test]
fn unknown_regime_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let out = ccucp(tmp.path(), &["sample", "--builtin", "stochastic", "--n", "5", "--regime", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("none") && err.contains("moderate") && err.contains("strong"), "{err}");
}

#[test]
fn exact_scenario_solve_matches_library() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["sample", "--n", "8", "--seed", "42", "--out", "s"]);
    ok(
        tmp.path(),
        &["solve", "--exact", "--builtin", "stochastic", "--scenarios", "s/scenarios.csv", "--p-level", "0.75", "--out", "r"],
    );
    let scenarios = load_scenarios(tmp.path().join("s/scenarios.csv")).unwrap();
    let expected = solve_stochastic_exact(&builtin_stochastic_instance(), &scenarios, 0.75, &ExactConfig::default()).unwrap();
    let got = json(tmp.path().join("r/solution.json"))["objective"].as_f64().unwrap();
    assert_eq!(got, expected.objective);
}

#[test]
fn exact_limit_exit_code() {
    let tmp = TempDir::new().unwrap();
    let out = ccucp(tmp.path(), &["solve", "--exact", "--builtin", "stochastic", "--n", "5000"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("greedy"));
}

#[test]
fn infeasible_exit_code() {
    let tmp = TempDir::new().unwrap();
    let mut instance = ccucp::instance::builtin_deterministic_instance();
    instance.demand = ccucp::instance::DemandSpec::Fixed { d: vec![160.0, 900.0, 400.0] };
    instance.save(tmp.path().join("big.json")).unwrap();
    let out = ccucp(tmp.path(), &["solve", "--instance", "big.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_is_monotone_in_p() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["sweep-p", "--p-grid", "0.5,0.6,0.7,0.8,0.9", "--n", "10", "--seeds", "0,3", "--regimes", "none,strong", "--gnuplot", "--out", "sw"],
    );
    let csv = read(tmp.path().join("sw/sweep.csv"));
    assert!(csv.starts_with("# manifest "));
    let rows: Vec<Vec<String>> = csv.lines().skip(2).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 20);
    for block in rows.chunks(5) {
        let costs: Vec<f64> = block.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(costs.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{block:?}");
    }
    assert!(tmp.path().join("sw/sweep.gp").exists());
}

#[test]
fn empty_p_grid_is_rejected() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(ccucp(tmp.path(), &["sweep-p", "--p-grid", ""]).status.code(), Some(2));
    assert_eq!(ccucp(tmp.path(), &["sweep-p"]).status.code(), Some(2));
}

#[test]
fn compile_reports_sizes() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["compile", "--default-weights", "--stats", "--out", "d"]);
    let stats = json(tmp.path().join("d/stats.json"));
    assert_eq!(stats["num_vars"], 291);
    assert_eq!(stats["reference_couplings"], 5651);
    assert!(stats["num_couplings"].as_u64().is_some());
    ok(tmp.path(), &["compile", "--builtin", "stochastic", "--n", "10", "--p-level", "0.9", "--stats", "--out", "s"]);
    let stats = json(tmp.path().join("s/stats.json"));
    assert_eq!(stats["num_vars"], 809);
    assert_eq!(stats["reference_couplings"], 26781);
    let model = ccucp::qubo::QuboModel::import(tmp.path().join("s/model.qubo")).unwrap();
    assert_eq!(model.num_vars, 809);
}

fn tuner_config(dir: &Path) {
    let mut config = ccucp::tuner::TunerConfig::fast(3);
    config.reads_per_iter = 20;
    config.sweeps = 40;
    std::fs::write(dir.join("tuner.json"), serde_json::to_string(&config).unwrap()).unwrap();
}

#[test]
fn tune_then_anneal() {
    let tmp = TempDir::new().unwrap();
    tuner_config(tmp.path());
    let stdout = ok(tmp.path(), &["tune", "--config", "tuner.json", "--final-reads", "200", "--gnuplot", "--out", "t"]);
    let trace = read(tmp.path().join("t/trace.csv"));
    let rows = trace.lines().count() - 2;
    let meta = json(tmp.path().join("t/tuner.json"));
    assert_eq!(meta["iterations"], rows);
    if meta["stop_reason"] == "max iterations" {
        assert_eq!(rows, 50);
    }
    assert!(stdout.contains("best feasible cost") || stdout.contains("no feasible sample"), "{stdout}");
    assert!(tmp.path().join("t/histogram.csv").exists());
    assert!(tmp.path().join("t/trace.gp").exists());
    let samples = read(tmp.path().join("t/samples.jsonl"));
    assert_eq!(samples.lines().count(), 201);

    ok(
        tmp.path(),
        &["anneal", "--weights-file", "t/weights.json", "--reads", "50", "--sweeps", "100", "--beta-end", "50", "--seed", "4", "--out", "a"],
    );
    let hist = read(tmp.path().join("a/histogram.csv"));
    assert_eq!(hist.lines().count(), 52);
}

#[test]
fn same_flags_give_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    tuner_config(tmp.path());
    for out in ["x", "y"] {
        ok(tmp.path(), &["tune", "--config", "tuner.json", "--final-reads", "100", "--out", out]);
    }
    for name in ["trace.csv", "weights.json", "tuner.json", "samples.jsonl", "histogram.csv"] {
        assert_eq!(read(tmp.path().join("x").join(name)), read(tmp.path().join("y").join(name)), "{name}");
    }
    assert_eq!(json(tmp.path().join("x/manifest.json"))["id"], json(tmp.path().join("y/manifest.json"))["id"]);
    assert_eq!(
        json(tmp.path().join("x/manifest.json"))["outputs"],
        json(tmp.path().join("y/manifest.json"))["outputs"]
    );
}

#[test]
fn anneal_accepts_exported_qubo() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["compile", "--out", "c"]);
    ok(tmp.path(), &["anneal", "--qubo", "c/model.qubo", "--reads", "10", "--sweeps", "20", "--out", "a"]);
    let first = read(tmp.path().join("a/samples.jsonl"));
    let header: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(header["manifest"], json(tmp.path().join("a/manifest.json"))["id"]);
    ok(tmp.path(), &["compile", "--builtin", "stochastic", "--out", "s"]);
    let out = ccucp(tmp.path(), &["anneal", "--qubo", "s/model.qubo", "--reads", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
