//! Experiment drivers: single runs, frequency sweeps, averaging-closeness
//! sweeps and the empirical search for a sufficient frequency.

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{NetworkCheck, Scenario, SystemChoice};
use super::HarnessError;
use crate::averaging::AveragedModel;
use crate::dynamics::{Network, StateVec};
use crate::geometry::{dist_to_a, dist_to_r_with_direction, in_open_semicircle};
use crate::simulate::{
    compare_to_average, integrate, invariance_probe, InvarianceReport, System, Trajectory,
};

/// Fraction of the horizon, at the end, over which a run must hold its residual.
pub const TAIL_FRACTION: f64 = 0.2;
/// Largest candidate frequency of the search.
pub const OMEGA_STAR_CAP: f64 = 65536.0;
/// Tolerance of the invariance probe on averaged runs.
pub const PROBE_TOLERANCE: f64 = 1e-6;

/// A validated scenario with its network, averaged model and initial state.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub network: Network,
    pub model: AveragedModel,
    pub check: NetworkCheck,
    pub x0: StateVec,
    /// Seed actually used for the initial state, if random.
    pub seed: Option<u64>,
}

impl Prepared {
    /// Validates the network and draws the initial state. A failed check
    /// aborts with the validation report.
    pub fn new(scenario: Scenario, seed: Option<u64>) -> Result<Self, HarnessError> {
        let check = scenario.check_network()?;
        if !check.passed() {
            return Err(HarnessError::Validation(check.report()));
        }
        let network = scenario.build_network(None)?;
        let model = AveragedModel::new(&network).map_err(|e| HarnessError::Numeric(format!("averaged model: {e}")))?;
        let seed = seed.or(scenario.initial.seed()).filter(|_| scenario_is_random(&scenario));
        let x0 = scenario.initial.sample(scenario.network.oscillators, seed)?;
        Ok(Prepared {
            scenario,
            network,
            model,
            check,
            x0,
            seed,
        })
    }

    pub fn rho(&self) -> Option<f64> {
        self.model.rho()
    }

    fn at_omega(&self, omega: f64) -> Result<Network, HarnessError> {
        self.network
            .with_omega(omega)
            .map_err(|e| HarnessError::Validation(format!("omega: {e}")))
    }

    fn run(&self, choice: SystemChoice, net: &Network, x0: &StateVec) -> Result<Trajectory, HarnessError> {
        let sys = match choice {
            SystemChoice::Original => System::Original(net),
            SystemChoice::Rotating => System::Rotating(net),
            SystemChoice::Averaged => System::Averaged(&self.model),
        };
        integrate(sys, x0, &self.scenario.integrator, self.rho()).map_err(|e| HarnessError::Numeric(e.to_string()))
    }
}

fn scenario_is_random(s: &Scenario) -> bool {
    s.initial.seed().is_some()
}

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub trajectory: Trajectory,
    /// Present for averaged runs of damped arrays.
    pub invariance: Option<InvarianceReport>,
}

pub fn single_run(p: &Prepared) -> Result<SingleRun, HarnessError> {
    let trajectory = p.run(p.scenario.system, &p.network, &p.x0)?;
    let invariance = match (p.scenario.system, p.rho()) {
        (SystemChoice::Averaged, Some(rho)) => Some(invariance_probe(&trajectory, rho, PROBE_TOLERANCE)),
        _ => None,
    };
    Ok(SingleRun { trajectory, invariance })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub omega: f64,
    /// `dist_R` for damped arrays, `dist_A` for harmonic ones.
    pub final_residual: f64,
    pub max_deviation: Option<f64>,
    /// Earliest recorded time after which the residual stays below the threshold.
    pub settle_time: Option<f64>,
    pub diverged: bool,
}

/// Earliest sample time from which every later residual is `<= threshold`.
pub fn settle_time(traj: &Trajectory, threshold: f64) -> Option<f64> {
    if traj.diverged {
        return None;
    }
    let res = traj.residuals();
    let mut first = None;
    for (k, r) in res.iter().enumerate().rev() {
        if *r <= threshold {
            first = Some(k);
        } else {
            break;
        }
    }
    first.map(|k| traj.times[k])
}

fn check_omegas(omegas: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if omegas.len() < 2 {
        return Err(HarnessError::Validation("a sweep needs at least two frequencies".into()));
    }
    if let Some(w) = omegas.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(HarnessError::Validation(format!("sweep frequency must be positive, got {w}")));
    }
    let mut sorted = omegas.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Runs the scenario's system at every frequency from the same initial state.
pub fn omega_sweep(p: &Prepared, omegas: &[f64]) -> Result<Vec<SweepRecord>, HarnessError> {
    let omegas = check_omegas(omegas)?;
    let sweep = &p.scenario.sweep;
    omegas
        .par_iter()
        .map(|&omega| {
            let net = p.at_omega(omega)?;
            let traj = p.run(p.scenario.system, &net, &p.x0)?;
            let max_deviation = if sweep.compute_deviation {
                Some(deviation(p, omega)?.0)
            } else {
                None
            };
            Ok(SweepRecord {
                omega,
                final_residual: *traj.residuals().last().expect("nonempty"),
                max_deviation,
                settle_time: settle_time(&traj, sweep.settle_threshold),
                diverged: traj.diverged,
            })
        })
        .collect()
}

fn deviation(p: &Prepared, omega: f64) -> Result<(f64, bool), HarnessError> {
    let d = compare_to_average(&p.x0, &p.model, omega, &p.scenario.integrator)
        .map_err(|e| HarnessError::Numeric(e.to_string()))?;
    Ok((d.max_deviation, d.diverged))
}

/// Rotating-frame runs against the averaged array at each frequency.
pub fn average_vs_original(p: &Prepared, omegas: &[f64]) -> Result<Vec<SweepRecord>, HarnessError> {
    let omegas = check_omegas(omegas)?;
    let threshold = p.scenario.sweep.settle_threshold;
    omegas
        .par_iter()
        .map(|&omega| {
            let net = p.at_omega(omega)?;
            let traj = p.run(SystemChoice::Rotating, &net, &p.x0)?;
            let (dev, dev_diverged) = deviation(p, omega)?;
            Ok(SweepRecord {
                omega,
                final_residual: *traj.residuals().last().expect("nonempty"),
                max_deviation: Some(dev),
                settle_time: settle_time(&traj, threshold),
                diverged: traj.diverged || dev_diverged,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaStarRow {
    pub omega: f64,
    pub draw: usize,
    pub seed: Option<u64>,
    pub initial_residual: f64,
    /// Largest residual over the tail window.
    pub tail_residual: f64,
    pub settled: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaStarResult {
    /// Smallest accepted power of two; `None` when the cap was reached.
    pub omega_star: Option<f64>,
    pub radius: f64,
    pub residual: f64,
    pub evidence: Vec<OmegaStarRow>,
}

/// Distance to the target set: `R` for damped arrays, `A` for harmonic ones.
fn target_distance(x: &[f64], rho: Option<f64>) -> f64 {
    match rho {
        Some(r) => dist_to_r_with_direction(x, r).0,
        None => dist_to_a(x),
    }
}

/// Pulls `x` toward its nearest target point until it lies within `radius`.
fn confine(x: StateVec, rho: Option<f64>, radius: f64) -> StateVec {
    let d = target_distance(&x, rho);
    if d <= radius {
        return x;
    }
    let m = x.m();
    let anchor: Vec<[f64; 2]> = match rho {
        Some(r) => {
            let u = dist_to_r_with_direction(&x, r).1.expect("semicircle draws have a mean direction");
            vec![[r * u[0], r * u[1]]; m]
        }
        None => {
            let mut c = [0.0, 0.0];
            for b in x.blocks() {
                c[0] += b[0] / m as f64;
                c[1] += b[1] / m as f64;
            }
            vec![c; m]
        }
    };
    let lambda = radius / d;
    let blocks: Vec<[f64; 2]> = x
        .blocks()
        .zip(&anchor)
        .map(|(b, a)| [a[0] + lambda * (b[0] - a[0]), a[1] + lambda * (b[1] - a[1])])
        .collect();
    StateVec::from_blocks(&blocks).expect("convex combination of finite points")
}

/// Doubling search for a frequency at which every seeded draw reaches and
/// holds `residual` over the tail window. Draw `k` uses seed `base + k`.
pub fn find_omega_star(p: &Prepared, radius: f64, residual: f64) -> Result<OmegaStarResult, HarnessError> {
    if !(residual > 0.0) {
        return Err(HarnessError::Validation(format!("delta must be positive, got {residual}")));
    }
    if !(radius > 0.0) {
        return Err(HarnessError::Validation(format!("Delta must be positive, got {radius}")));
    }
    let rho = p.rho();
    let m = p.scenario.network.oscillators;
    let draws = if scenario_is_random(&p.scenario) {
        p.scenario.omega_star.draws
    } else {
        1
    };
    let base = p.seed.unwrap_or(0);
    let mut starts = Vec::with_capacity(draws);
    for k in 0..draws {
        let seed = p.seed.map(|_| base.wrapping_add(k as u64));
        let x = p.scenario.initial.sample(m, seed)?;
        let pts: Vec<[f64; 2]> = x.blocks().collect();
        if rho.is_some() && !in_open_semicircle(&pts) {
            return Err(HarnessError::Precondition(format!(
                "draw {k}: initial states do not lie in an open half-plane through the origin"
            )));
        }
        starts.push((seed, confine(x, rho, radius)));
    }

    let horizon = p.scenario.integrator.horizon;
    let tail_start = (1.0 - TAIL_FRACTION) * horizon;
    let mut evidence = Vec::new();
    let mut omega = 1.0;
    while omega <= OMEGA_STAR_CAP {
        let net = p.at_omega(omega)?;
        let rows = starts
            .par_iter()
            .enumerate()
            .map(|(k, (seed, x0))| {
                let traj = p.run(SystemChoice::Original, &net, x0)?;
                let res = traj.residuals();
                let tail = traj
                    .times
                    .iter()
                    .zip(&res)
                    .filter(|(t, _)| **t >= tail_start)
                    .map(|(_, r)| *r)
                    .fold(0.0, f64::max);
                let reached = traj.times.last().is_some_and(|t| *t >= horizon);
                Ok(OmegaStarRow {
                    omega,
                    draw: k,
                    seed: *seed,
                    initial_residual: res[0],
                    tail_residual: tail,
                    settled: !traj.diverged && reached && tail <= residual,
                    diverged: traj.diverged,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let accepted = rows.iter().all(|r| r.settled);
        evidence.extend(rows);
        if accepted {
            return Ok(OmegaStarResult {
                omega_star: Some(omega),
                radius,
                residual,
                evidence,
            });
        }
        omega *= 2.0;
    }
    Ok(OmegaStarResult {
        omega_star: None,
        radius,
        residual,
        evidence,
    })
}
