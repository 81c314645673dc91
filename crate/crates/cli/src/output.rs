//! Result files: `results.csv`, `trace.csv`, `designs.jsonl`, `summary.json`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use rbrs_core::channels::ChannelSet;
use rbrs_core::{SchemeResult, SystemConfig};

use crate::run::{Outcome, Plan, Summary};

pub const RESULTS: &str = "results.csv";
pub const TRACE: &str = "trace.csv";
pub const DESIGNS: &str = "designs.jsonl";
pub const SUMMARY: &str = "summary.json";

/// One row of `results.csv`. Field order is the column order.
#[derive(Debug, Serialize)]
struct Row<'a> {
    experiment: &'a str,
    scheme: &'a str,
    realization: usize,
    seed: u64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: u64,
    epsilon: String,
    #[serde(rename = "P_max")]
    p_max: f64,
    sigma2: String,
    delta: String,
    alpha: String,
    grid_value: String,
    iterations: Option<usize>,
    min_rate: Option<f64>,
    common_rate_sum: Option<f64>,
    feasible: bool,
    rank_one: Option<bool>,
    solve_ms: Option<u64>,
}

/// A per-user column: one value when all users agree, else `;`-joined.
fn per_user(v: &[f64]) -> String {
    if v.windows(2).all(|w| w[0] == w[1]) {
        v.first().map(|x| x.to_string()).unwrap_or_default()
    } else {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
    }
}

fn opt(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

#[derive(Serialize)]
struct TraceRow<'a> {
    experiment: &'a str,
    scheme: &'a str,
    grid_value: String,
    alpha: String,
    realization: usize,
    iteration: usize,
    objective: f64,
}

#[derive(Serialize)]
struct DesignLine<'a> {
    experiment: &'a str,
    realization: usize,
    seed: u64,
    grid_value: Option<f64>,
    alpha: Option<f64>,
    system: &'a SystemConfig,
    channels: &'a ChannelSet,
    result: &'a SchemeResult,
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes every output file into `dir`. Wall-clock times are only written
/// when `timings` is set, so default output is byte-identical across runs.
pub fn write_all(dir: &Path, plan: &Plan, outcomes: &[Outcome], summary: &Summary, timings: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let name = plan.experiment.name();

    let mut rows = csv::Writer::from_path(dir.join(RESULTS)).map_err(csv_err)?;
    let mut trace = csv::Writer::from_path(dir.join(TRACE)).map_err(csv_err)?;
    let mut designs = BufWriter::new(File::create(dir.join(DESIGNS))?);
    for o in outcomes {
        let point = &plan.points[o.job.point];
        let s = &point.system;
        let r = o.result.as_ref().ok();
        rows.serialize(Row {
            experiment: name,
            scheme: o.job.scheme.name(),
            realization: o.job.realization,
            seed: o.seed,
            m: s.antennas,
            k: s.users,
            l: s.blocklength,
            epsilon: per_user(&s.epsilon),
            p_max: s.p_max,
            sigma2: per_user(&s.sigma2),
            delta: per_user(&s.delta),
            alpha: per_user(&s.alpha),
            grid_value: opt(point.grid_value),
            iterations: r.map(|r| r.iterations),
            min_rate: r.map(|r| r.min_rate),
            common_rate_sum: r.map(|r| r.common_rate_sum),
            feasible: r.is_some_and(|r| r.feasible),
            rank_one: r.map(|r| r.rank_one),
            solve_ms: r.filter(|_| timings).map(|r| (r.wall_time * 1e3).round() as u64),
        })
        .map_err(csv_err)?;
        let Some(r) = r else { continue };
        for (i, &objective) in r.objective_trace.iter().enumerate() {
            trace
                .serialize(TraceRow {
                    experiment: name,
                    scheme: o.job.scheme.name(),
                    grid_value: opt(point.grid_value),
                    alpha: point.alpha.map(|a| a.to_string()).unwrap_or_default(),
                    realization: o.job.realization,
                    iteration: i,
                    objective,
                })
                .map_err(csv_err)?;
        }
        let mut result = r.clone();
        if !timings {
            result.wall_time = 0.0;
        }
        let line = DesignLine {
            experiment: name,
            realization: o.job.realization,
            seed: o.seed,
            grid_value: point.grid_value.is_finite().then_some(point.grid_value),
            alpha: point.alpha,
            system: s,
            channels: o.channels.as_ref().expect("successful runs have channels"),
            result: &result,
        };
        serde_json::to_writer(&mut designs, &line)?;
        designs.write_all(b"\n")?;
    }
    rows.flush()?;
    trace.flush()?;
    designs.flush()?;

    let mut f = BufWriter::new(File::create(dir.join(SUMMARY))?);
    serde_json::to_writer_pretty(&mut f, summary)?;
    f.write_all(b"\n")?;
    f.flush()
}
