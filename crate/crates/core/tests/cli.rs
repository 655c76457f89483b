use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adaptim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptim")).args(args).output().expect("binary runs")
}

fn write_graph(dir: &Path) -> String {
    let path = dir.join("g.txt");
    fs::write(&path, "# tiny\na b\nb c\nc a\na d\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_graph(dir.path());
    let out = dir.path().join("r.csv");
    let o = adaptim(&[
        "run", "--graph", &graph, "--policies", "rdm", "--rounds", "2", "--reps", "1", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "policy,rep,round,seed,new_activated,cum_reward");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("rdm,0,1,"));
}

#[test]
fn run_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_graph(dir.path());
    let out = dir.path().join("r.csv");
    let summary = dir.path().join("s.csv");
    let o = adaptim(&[
        "run", "--graph", &graph, "--policies", "rdm,bgg_dgr", "--rounds", "3", "--reps", "2", "--out",
        out.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&summary).unwrap();
    assert_eq!(text.lines().next().unwrap(), "policy,round,reps,mean,std");
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn run_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_graph(dir.path());
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, format!("graph = {graph}\npolicies = grd_kw\nrounds = 2\nreps = 1\nm-cap = 100\n")).unwrap();
    let o = adaptim(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().nth(1).unwrap().starts_with("grd_kw,0,1,"));
}

#[test]
fn run_without_graph_fails() {
    let o = adaptim(&["run", "--policies", "rdm"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--graph"));
}

#[test]
fn bad_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_graph(dir.path());
    assert_eq!(adaptim(&["run", "--graph", &graph, "--policies", "nope"]).status.code(), Some(1));
    assert_eq!(adaptim(&["run", "--graph", &graph, "--reps", "0"]).status.code(), Some(1));
    assert_eq!(adaptim(&["run", "--graph", "/nonexistent/graph.txt"]).status.code(), Some(1));
    assert_eq!(adaptim(&["run", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(adaptim(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(adaptim(&["--help"]).status.code(), Some(0));
    assert_eq!(adaptim(&["--version"]).status.code(), Some(0));
}

#[test]
fn verify_emits_json_report() {
    let o = adaptim(&["verify", "--suite", "theorem1", "--trials", "50", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["check"], "theorem1");
    assert_eq!(report["instances"], 50);
    assert_eq!(report["seed"], 1);
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_rejects_unknown_suite() {
    assert_eq!(adaptim(&["verify", "--suite", "theorem9"]).status.code(), Some(1));
}

#[test]
fn stats_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_graph(dir.path());
    let o = adaptim(&["stats", "--graph", &graph]);
    assert!(o.status.success());
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["nodes"], 4);
    assert_eq!(stats["arcs"], 4);
    assert_eq!(stats["d_max"], 2);
}

#[test]
fn gen_output_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let f = dir.path().join("f.txt");
    let o = adaptim(&[
        "gen", "--nodes", "20", "--arcs", "50", "--seed", "4", "--out-graph", g.to_str().unwrap(), "--out-features",
        f.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let edges = fs::read_to_string(&g).unwrap();
    assert_eq!(edges.lines().count(), 50);
    for line in edges.lines() {
        let p: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!((0.01..=0.1).contains(&p));
    }
    let r = adaptim(&[
        "run", "--graph", g.to_str().unwrap(), "--features", f.to_str().unwrap(), "--policies", "grd_lf", "--reps",
        "1", "--m-cap", "200",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(String::from_utf8(r.stdout).unwrap().lines().count(), 1 + 10);
}
