//! Scenario-driven experiments and their file outputs.

pub mod experiments;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use experiments::{
    average_vs_original, find_omega_star, omega_sweep, settle_time, single_run, OmegaStarResult, OmegaStarRow,
    Prepared, SingleRun, SweepRecord,
};
pub use scenario::{ExperimentKind, InitialSpec, Scenario, SystemChoice};

use output::{FinalMetrics, InvarianceSummary, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed:\n{0}")]
    Validation(String),
    #[error("precondition unmet: {0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse(_) => 4,
            HarnessError::Validation(_) | HarnessError::Precondition(_) => 2,
            _ => 1,
        }
    }
}

/// Exit code of a run in which some trajectory diverged.
pub const EXIT_DIVERGED: i32 = 3;

/// Scenarios shipped with the tool, addressable by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("vdp4_sync", include_str!("../../scenarios/vdp4_sync.toml")),
    ("vdp4_average", include_str!("../../scenarios/vdp4_average.toml")),
    ("harmonic_pair_closeness", include_str!("../../scenarios/harmonic_pair_closeness.toml")),
    ("harmonic3_ring_sweep", include_str!("../../scenarios/harmonic3_ring_sweep.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Reads a scenario file, falling back to a bundled scenario of that name.
pub fn load_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => match path.to_str().and_then(bundled) {
            Some(t) => t.to_string(),
            None => return Err(HarnessError::Parse(format!("{}: {e}", path.display()))),
        },
    };
    Scenario::from_toml_str(&text).map_err(|e| match e {
        HarnessError::Parse(msg) => HarnessError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Command-line overrides of a scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tidy: bool,
    pub experiment: Option<ExperimentKind>,
    pub omegas: Option<Vec<f64>>,
    /// Initial-distance bound of the frequency search.
    pub radius: Option<f64>,
    /// Target residual of the frequency search.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
    pub diverged: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.diverged {
            EXIT_DIVERGED
        } else {
            0
        }
    }
}

/// Executes the scenario's experiment and writes its outputs.
pub fn run_scenario(scenario: Scenario, opts: &RunOptions) -> Result<RunOutcome, HarnessError> {
    let experiment = opts.experiment.unwrap_or(scenario.experiment);
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| scenario.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let tidy = opts.tidy || scenario.output.tidy;
    let prepared = Prepared::new(scenario, opts.seed)?;
    let name = prepared.scenario.name.clone();
    let mut summary = Summary {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: name.clone(),
        experiment,
        system: prepared.scenario.system,
        seed: prepared.seed,
        rng: scenario::RNG_ALGORITHM,
        rho: prepared.rho(),
        omega: prepared.network.omega(),
        roots: prepared.check.roots.iter().map(|r| r + 1).collect(),
        samples: 0,
        final_time: None,
        diverged: false,
        final_metrics: None,
        invariance: None,
        sweep: None,
        omega_star: None,
        config: prepared.scenario.clone(),
    };
    let mut files = Vec::new();
    let omegas = || opts.omegas.clone().unwrap_or_else(|| prepared.scenario.network.omegas.clone());

    match experiment {
        ExperimentKind::SingleRun => {
            let run = single_run(&prepared)?;
            let traj = &run.trajectory;
            summary.samples = traj.len();
            summary.final_time = traj.times.last().copied();
            summary.diverged = traj.diverged;
            summary.final_metrics = Some(FinalMetrics::from(traj.last_metrics()));
            summary.invariance = run.invariance.as_ref().map(InvarianceSummary::from);
            files.push(output::write_file(&dir, &format!("{name}.trajectory.csv"), |w| {
                output::write_trajectory_csv(w, traj)
            })?);
            if tidy {
                files.push(output::write_file(&dir, &format!("{name}.tidy.csv"), |w| {
                    output::write_tidy_csv(w, traj)
                })?);
            }
        }
        ExperimentKind::OmegaSweep | ExperimentKind::AverageVsOriginal => {
            let records = if experiment == ExperimentKind::OmegaSweep {
                omega_sweep(&prepared, &omegas())?
            } else {
                average_vs_original(&prepared, &omegas())?
            };
            summary.diverged = records.iter().any(|r| r.diverged);
            files.push(output::write_file(&dir, &format!("{name}.sweep.csv"), |w| {
                output::write_sweep_csv(w, &records)
            })?);
            summary.sweep = Some(records);
        }
        ExperimentKind::OmegaStarSearch => {
            let missing = |what: &str| HarnessError::Validation(format!("frequency search needs {what}"));
            let radius = opts
                .radius
                .or(prepared.scenario.omega_star.radius)
                .ok_or_else(|| missing("an initial-distance bound (--Delta or omega_star.radius)"))?;
            let residual = opts
                .residual
                .or(prepared.scenario.omega_star.residual)
                .ok_or_else(|| missing("a target residual (--delta or omega_star.residual)"))?;
            let result = find_omega_star(&prepared, radius, residual)?;
            files.push(output::write_file(&dir, &format!("{name}.omega_star.csv"), |w| {
                output::write_evidence_csv(w, &result.evidence)
            })?);
            summary.omega_star = Some(result);
        }
    }
    files.push(output::write_file(&dir, &format!("{name}.summary.json"), |w| {
        output::write_summary_json(w, &summary)
    })?);
    Ok(RunOutcome {
        diverged: summary.diverged,
        summary,
        files,
    })
}
