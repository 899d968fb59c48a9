//! CSV and JSON emission.
//!
//! Trajectory CSV: `t,q1,p1,…,qm,pm,dist_B,dist_R,dist_A,cone_angle,V`, one
//! row per recorded sample; undefined metrics are empty cells.
//! Sweep CSV: `omega,final_residual,max_deviation,settle_time,diverged`.
//! Long-format CSV: `t,series,value`.
//! Summary JSON: the keys in [`SUMMARY_FIELDS`].

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::experiments::{OmegaStarResult, OmegaStarRow, SweepRecord};
use super::scenario::{ExperimentKind, Scenario, SystemChoice};
use super::HarnessError;
use crate::simulate::{InvarianceReport, ProbeStatus, SampleMetrics, Trajectory};

pub const METRIC_COLUMNS: [&str; 5] = ["dist_B", "dist_R", "dist_A", "cone_angle", "V"];
pub const SWEEP_HEADER: [&str; 5] = ["omega", "final_residual", "max_deviation", "settle_time", "diverged"];
pub const TIDY_HEADER: [&str; 3] = ["t", "series", "value"];
pub const SUMMARY_FIELDS: [&str; 18] = [
    "tool",
    "version",
    "scenario",
    "experiment",
    "system",
    "seed",
    "rng",
    "rho",
    "omega",
    "roots",
    "samples",
    "final_time",
    "diverged",
    "final_metrics",
    "invariance",
    "sweep",
    "omega_star",
    "config",
];

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn trajectory_header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=m {
        h.push(format!("q{i}"));
        h.push(format!("p{i}"));
    }
    h.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    h
}

fn metric_cells(mt: &SampleMetrics) -> [String; 5] {
    [
        opt(mt.dist_b),
        opt(mt.dist_r),
        num(mt.dist_a),
        opt(mt.cone_angle),
        opt(mt.lyapunov),
    ]
}

pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<(), HarnessError> {
    let m = traj.states.first().map_or(0, |s| s.m());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(m))?;
    for ((t, x), mt) in traj.times.iter().zip(&traj.states).zip(&traj.metrics) {
        let mut row = Vec::with_capacity(2 * m + 6);
        row.push(num(*t));
        row.extend(x.iter().map(|v| num(*v)));
        row.extend(metric_cells(mt));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tidy_csv<W: Write>(out: W, traj: &Trajectory) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIDY_HEADER)?;
    for ((t, x), mt) in traj.times.iter().zip(&traj.states).zip(&traj.metrics) {
        let t = num(*t);
        for (i, b) in x.blocks().enumerate() {
            w.write_record([t.as_str(), &format!("q{}", i + 1), &num(b[0])])?;
            w.write_record([t.as_str(), &format!("p{}", i + 1), &num(b[1])])?;
        }
        for (name, cell) in METRIC_COLUMNS.iter().zip(metric_cells(mt)) {
            if !cell.is_empty() {
                w.write_record([t.as_str(), name, &cell])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            num(r.omega),
            num(r.final_residual),
            opt(r.max_deviation),
            opt(r.settle_time),
            r.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_evidence_csv<W: Write>(out: W, rows: &[OmegaStarRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "draw", "seed", "initial_residual", "tail_residual", "settled", "diverged"])?;
    for r in rows {
        w.write_record([
            num(r.omega),
            r.draw.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            num(r.initial_residual),
            num(r.tail_residual),
            r.settled.to_string(),
            r.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalMetrics {
    #[serde(rename = "dist_B")]
    pub dist_b: Option<f64>,
    #[serde(rename = "dist_R")]
    pub dist_r: Option<f64>,
    #[serde(rename = "dist_A")]
    pub dist_a: f64,
    pub cone_angle: Option<f64>,
    #[serde(rename = "V")]
    pub v: Option<f64>,
}

impl From<&SampleMetrics> for FinalMetrics {
    fn from(m: &SampleMetrics) -> Self {
        FinalMetrics {
            dist_b: m.dist_b,
            dist_r: m.dist_r,
            dist_a: m.dist_a,
            cone_angle: m.cone_angle,
            v: m.lyapunov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceSummary {
    pub status: String,
    pub wedge_ok: bool,
    pub max_wedge_violation: Option<f64>,
    pub angle_ok: bool,
    pub max_angle_increase: Option<f64>,
    pub lyapunov_ok: bool,
    pub max_lyapunov_increase: Option<f64>,
}

impl From<&InvarianceReport> for InvarianceSummary {
    fn from(r: &InvarianceReport) -> Self {
        let finite = |x: f64| Some(x).filter(|v| v.is_finite());
        InvarianceSummary {
            status: match &r.status {
                ProbeStatus::Checked => "checked".into(),
                ProbeStatus::PreconditionUnmet(why) => format!("precondition unmet: {why}"),
            },
            wedge_ok: r.wedge_ok,
            max_wedge_violation: finite(r.max_wedge_violation),
            angle_ok: r.angle_ok,
            max_angle_increase: finite(r.max_angle_increase),
            lyapunov_ok: r.lyapunov_ok,
            max_lyapunov_increase: finite(r.max_lyapunov_increase),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub experiment: ExperimentKind,
    pub system: SystemChoice,
    pub seed: Option<u64>,
    pub rng: &'static str,
    pub rho: Option<f64>,
    pub omega: f64,
    /// 1-based root nodes of the coupling graph.
    pub roots: Vec<usize>,
    pub samples: usize,
    pub final_time: Option<f64>,
    pub diverged: bool,
    pub final_metrics: Option<FinalMetrics>,
    pub invariance: Option<InvarianceSummary>,
    pub sweep: Option<Vec<SweepRecord>>,
    pub omega_star: Option<OmegaStarResult>,
    pub config: Scenario,
}

pub fn write_summary_json<W: Write>(mut out: W, summary: &Summary) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Creates `dir/file` and hands a buffered writer to `body`.
pub fn write_file<F>(dir: &Path, file: &str, body: F) -> Result<std::path::PathBuf, HarnessError>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<(), HarnessError>,
{
    std::fs::create_dir_all(dir)?;
    let path = dir.join(file);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(path)
}
