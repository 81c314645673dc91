use std::path::Path;
use std::process::{Command, Output};

use rbrs_core::channels::ChannelSet;
use rbrs_core::schemes::bounds::evaluate;
use rbrs_core::{SchemeResult, SystemConfig};
use serde::Deserialize;

const COLUMNS: &str = "experiment,scheme,realization,seed,M,K,L,epsilon,P_max,sigma2,delta,alpha,grid_value,\
iterations,min_rate,common_rate_sum,feasible,rank_one,solve_ms";

/// A small instance that solves in well under a second per run.
const SYSTEM: &str = r#""system": {"M": 2, "K": 2, "L": 500, "epsilon": 1e-3, "P_max": 10, "sigma2": 1, "delta": 0.05}"#;

fn rbrs(args: &[&str], workers: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rbrs"));
    cmd.args(args);
    match workers {
        Some(n) => cmd.env("RBRS_WORKERS", n.to_string()),
        None => cmd.env_remove("RBRS_WORKERS"),
    };
    cmd.output().expect("run rbrs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_ok(sub: &str, config: &str, out: &Path, extra: &[&str], workers: Option<usize>) {
    let mut args = vec![sub, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = rbrs(&args, workers);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[derive(Deserialize)]
struct DesignLine {
    system: SystemConfig,
    channels: ChannelSet,
    result: SchemeResult,
}

fn designs(dir: &Path) -> Vec<DesignLine> {
    std::fs::read_to_string(dir.join("designs.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn convergence_writes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        &format!(r#"{{"experiment": "convergence", {SYSTEM}, "grid": [0.01, 0.05], "n_realizations": 2, "seed": 3}}"#),
    );
    let out = tmp.path().join("out");
    run_ok("convergence", &cfg, &out, &[], Some(1));

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), COLUMNS);
    assert_eq!(lines.count(), 4);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("experiment,scheme,grid_value,alpha,realization,iteration,objective"));
    assert!(trace.lines().count() > 4);

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "convergence");
    let points = summary["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0]["runs"], 2);
    assert_eq!(points[1]["grid_value"], 0.05);
    assert!(points[0]["mean_min_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_is_identical_for_any_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "b.json",
        &format!(
            r#"{{"experiment": "sweep-bler", {SYSTEM}, "grid": [1e-5, 1e-3],
                "schemes": ["RB-RS-FBL", "RB-NoRS-FBL"], "n_realizations": 2, "seed": 9}}"#
        ),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok("sweep-bler", &cfg, &a, &[], Some(1));
    run_ok("sweep-bler", &cfg, &b, &[], Some(3));
    for f in ["results.csv", "trace.csv", "designs.jsonl", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn rows_are_rederivable_from_designs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "s.json",
        &format!(r#"{{"experiment": "robustness", {SYSTEM}, "grid": [0, 1e-4], "n_realizations": 2}}"#),
    );
    let out = tmp.path().join("out");
    run_ok("robustness", &cfg, &out, &[], None);

    let mut reader = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let csv_rates: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap().get(14).unwrap().parse().unwrap())
        .collect();
    let lines = designs(&out);
    assert_eq!(lines.len(), csv_rates.len());
    for (line, csv_rate) in lines.iter().zip(csv_rates) {
        let r = &line.result;
        let form = r.scheme_id.formulation(&line.system).unwrap();
        let ev = evaluate(r.design.as_ref().unwrap(), &line.channels, &line.system, &form);
        assert!((ev.min_rate - r.min_rate).abs() <= 1e-6, "{} vs {}", ev.min_rate, r.min_rate);
        assert_eq!(ev.feasible, r.feasible);
        assert_eq!(csv_rate, r.min_rate);
    }
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "o.json",
        &format!(r#"{{"experiment": "sweep-blocklength", {SYSTEM}, "grid": [500], "schemes": ["RB-RS-FBL"], "n_realizations": 1}}"#),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok("sweep-blocklength", &cfg, &a, &["--realizations", "2", "--seed", "5"], None);
    run_ok("sweep-blocklength", &cfg, &b, &["--realizations", "2", "--seed", "6", "--timings"], None);
    let rows = |d: &Path| -> Vec<csv::StringRecord> {
        csv::Reader::from_path(d.join("results.csv")).unwrap().records().map(|r| r.unwrap()).collect()
    };
    let (ra, rb) = (rows(&a), rows(&b));
    assert_eq!(ra.len(), 2);
    assert_ne!(ra[0].get(3), rb[0].get(3), "seed column");
    assert_eq!(ra[0].get(18), Some(""));
    assert!(rb[0].get(18).unwrap().parse::<u64>().is_ok());
}

#[test]
fn snr_sweep_spans_the_alpha_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "p.json",
        r#"{"experiment": "sweep-snr",
            "system": {"M": 2, "K": 2, "L": 500, "epsilon": 1e-3, "P_max": 1, "sigma2": 1, "d": 0.5},
            "grid": [10, 100], "alpha_grid": [0.2, 1.0], "schemes": ["RB-RS-FBL"], "n_realizations": 1}"#,
    );
    let out = tmp.path().join("out");
    run_ok("sweep-snr", &cfg, &out, &[], None);
    let recs: Vec<csv::StringRecord> = csv::Reader::from_path(out.join("results.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(recs.len(), 4);
    assert_eq!(recs[3].get(11), Some("1"));
    assert_eq!(recs[3].get(10), Some("0.005"));
}

#[test]
fn single_solve_reads_a_channel_file() {
    let tmp = tempfile::tempdir().unwrap();
    let ch = rbrs_core::channels::sample_rayleigh(2, 2, 1);
    write(tmp.path(), "h.json", &ch.to_json());
    let cfg = write(
        tmp.path(),
        "one.json",
        &format!(r#"{{"experiment": "single-solve", {SYSTEM}, "schemes": ["RB-NoRS-FBL"], "channel": {{"kind": "file", "path": "h.json"}}}}"#),
    );
    let out = tmp.path().join("out");
    run_ok("single-solve", &cfg, &out, &[], None);
    let lines = designs(&out);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0].channels.h_hat, ch.h_hat);
    assert_eq!(lines[0].channels.delta, vec![0.05; 2]);
    assert_eq!(lines[0].result.common_rate_sum, 0.0);
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_eps = write(
        tmp.path(),
        "e.json",
        r#"{"system": {"M": 2, "K": 2, "L": 500, "epsilon": 0.6, "P_max": 10, "sigma2": 1}, "grid": [0.1]}"#,
    );
    let o = rbrs(&["convergence", "--config", &bad_eps], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("field `system.epsilon`") && err.contains("epsilon out of range"), "{err}");

    let syntax = write(tmp.path(), "s.json", "{\n  \"system\": {\n    \"M\": 2,\n  }\n}");
    let o = rbrs(&["convergence", "--config", &syntax], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let empty_grid = write(tmp.path(), "g.json", &format!(r#"{{{SYSTEM}, "grid": []}}"#));
    let o = rbrs(&["sweep-bler", "--config", &empty_grid], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("field `grid`"));

    let wrong = write(tmp.path(), "w.json", &format!(r#"{{"experiment": "sweep-snr", {SYSTEM}, "grid": [1]}}"#));
    let o = rbrs(&["sweep-bler", "--config", &wrong], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn failed_realizations_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // User 1 has no channel, so no design can serve it.
    let mut ch = rbrs_core::channels::sample_rayleigh(2, 2, 1);
    ch.h_hat[1].fill(rbrs_core::C64::new(0.0, 0.0));
    write(tmp.path(), "h.json", &ch.to_json());
    let cfg = write(
        tmp.path(),
        "f.json",
        &format!(r#"{{"experiment": "single-solve", {SYSTEM}, "channel": {{"kind": "file", "path": "h.json"}}}}"#),
    );
    let out = tmp.path().join("out");
    let o = rbrs(&["single-solve", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains(",false,"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failed_runs"], 1);
}
