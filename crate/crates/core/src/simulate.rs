//! Fixed-step integration of the original, rotating-frame and averaged
//! arrays, with per-sample synchronization metrics.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::averaging::AveragedModel;
use crate::dynamics::{original_field, rotating_field, DynamicsError, Network, StateVec};
use crate::geometry::{cone_angle, dist_to_a, dist_to_b, dist_to_r, lyapunov_v, wedge_of};

/// Any state entry beyond this magnitude aborts the run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("invalid integrator config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("initial state is not finite")]
    NonFiniteStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta.
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: Method,
    /// Base step `h`.
    pub step: f64,
    /// Steps per rotation period `2π/ω` for frequency-dependent systems.
    #[serde(default = "default_samples_per_rotation")]
    pub samples_per_rotation: usize,
    /// Record every this many steps; the final step is always recorded.
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
    /// Horizon `T`.
    pub horizon: f64,
}

fn default_samples_per_rotation() -> usize {
    50
}

fn default_record_stride() -> usize {
    10
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            step: 1e-2,
            samples_per_rotation: default_samples_per_rotation(),
            record_stride: default_record_stride(),
            horizon: 100.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), SimulateError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(SimulateError::BadConfig(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(SimulateError::BadConfig(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if self.samples_per_rotation == 0 || self.record_stride == 0 {
            return Err(SimulateError::BadConfig(
                "samples_per_rotation and record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// `min(h, 2π/(ωK))` when the system rotates at `ω`, else `h`.
    pub fn effective_step(&self, omega: Option<f64>) -> f64 {
        match omega {
            Some(w) => self.step.min(TAU / (w * self.samples_per_rotation as f64)),
            None => self.step,
        }
    }

    /// Number of steps and the uniform step landing exactly on the horizon.
    fn grid(&self, omega: Option<f64>) -> (usize, f64) {
        if self.horizon == 0.0 {
            return (0, 0.0);
        }
        let h = self.effective_step(omega);
        let n = (self.horizon / h - 1e-9).ceil().max(1.0) as usize;
        (n, self.horizon / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemTag {
    Original,
    Rotating,
    Averaged,
}

/// Right-hand side selector.
#[derive(Debug, Clone, Copy)]
pub enum System<'a> {
    /// `ξ̇ = ℓ(ξ, ω)` or `h(ξ, ω)`.
    Original(&'a Network),
    /// `ẋ = ℓ̃(x, ωt)` or `h̃(x, ωt)`.
    Rotating(&'a Network),
    /// The period-averaged array.
    Averaged(&'a AveragedModel),
}

impl System<'_> {
    pub fn tag(&self) -> SystemTag {
        match self {
            System::Original(_) => SystemTag::Original,
            System::Rotating(_) => SystemTag::Rotating,
            System::Averaged(_) => SystemTag::Averaged,
        }
    }

    fn network(&self) -> &Network {
        match self {
            System::Original(n) | System::Rotating(n) => n,
            System::Averaged(model) => model.network(),
        }
    }

    /// Frequency that sets the step refinement, if the field oscillates.
    pub fn fast_frequency(&self) -> Option<f64> {
        match self {
            System::Original(n) | System::Rotating(n) => Some(n.omega()),
            System::Averaged(_) => None,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            System::Original(n) => original_field(n, x, out),
            System::Rotating(n) => rotating_field(n, n.omega() * t, x, out),
            System::Averaged(model) => model.field(x, out),
        }
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, sys: &System, t: f64, h: f64, x: &mut [f64]) {
        let n = x.len();
        sys.eval(t, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        sys.eval(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        sys.eval(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        sys.eval(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn blown_up(x: &[f64]) -> bool {
    x.iter().any(|v| !(v.abs() <= DIVERGENCE_THRESHOLD))
}

/// Metrics of one recorded sample. Entries that need `ρ` are `None` when
/// no amplitude is known (harmonic arrays).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMetrics {
    pub dist_b: Option<f64>,
    pub dist_r: Option<f64>,
    pub dist_a: f64,
    pub cone_angle: Option<f64>,
    pub lyapunov: Option<f64>,
}

pub fn sample_metrics(x: &[f64], rho: Option<f64>) -> SampleMetrics {
    SampleMetrics {
        dist_b: rho.map(|r| dist_to_b(x, r)),
        dist_r: rho.map(|r| dist_to_r(x, r)),
        dist_a: dist_to_a(x),
        cone_angle: cone_angle(x),
        lyapunov: rho.map(|r| lyapunov_v(x, r)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub system: SystemTag,
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
    pub metrics: Vec<SampleMetrics>,
    /// Set when the run was cut short by a non-finite or oversized state.
    pub diverged: bool,
    pub rho: Option<f64>,
    /// Step actually used.
    pub step: f64,
}

impl Trajectory {
    pub fn last_state(&self) -> &StateVec {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn last_metrics(&self) -> &SampleMetrics {
        self.metrics.last().expect("trajectory always holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The synchronization residual: `dist_R` when `ρ` is known, else `dist_A`.
    pub fn residuals(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.dist_r.unwrap_or(m.dist_a)).collect()
    }
}

/// Integrates `system` from `x0` over `[0, T]` with fixed-step RK4.
pub fn integrate(
    system: System,
    x0: &StateVec,
    cfg: &IntegratorConfig,
    rho: Option<f64>,
) -> Result<Trajectory, SimulateError> {
    cfg.validate()?;
    system.network().check_dim(x0.len())?;
    if blown_up(x0) {
        return Err(SimulateError::NonFiniteStart);
    }
    let (n_steps, h) = cfg.grid(system.fast_frequency());
    let mut traj = Trajectory {
        system: system.tag(),
        times: vec![0.0],
        states: vec![x0.clone()],
        metrics: vec![sample_metrics(x0, rho)],
        diverged: false,
        rho,
        step: h,
    };
    let mut x: Vec<f64> = x0.to_vec();
    let mut rk = Rk4::new(x.len());
    for k in 0..n_steps {
        let t = k as f64 * h;
        rk.step(&system, t, h, &mut x);
        if blown_up(&x) {
            traj.diverged = true;
            break;
        }
        let done = k + 1;
        if done % cfg.record_stride == 0 || done == n_steps {
            let t_next = if done == n_steps { cfg.horizon } else { done as f64 * h };
            traj.times.push(t_next);
            traj.metrics.push(sample_metrics(&x, rho));
            traj.states.push(StateVec::new(x.clone()).expect("finite by the divergence check"));
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    /// `max_t |x(t) − η(t)|` over every step.
    pub max_deviation: f64,
    pub at_time: f64,
    pub diverged: bool,
}

/// Runs the rotating-frame array at frequency `omega` and the averaged array
/// from the same initial state on a common grid and reports the largest
/// separation.
pub fn compare_to_average(
    x0: &StateVec,
    model: &AveragedModel,
    omega: f64,
    cfg: &IntegratorConfig,
) -> Result<Deviation, SimulateError> {
    cfg.validate()?;
    let net = model.network().with_omega(omega)?;
    net.check_dim(x0.len())?;
    let rot = System::Rotating(&net);
    let avg = System::Averaged(model);
    let (n_steps, h) = cfg.grid(Some(omega));
    let mut x = x0.to_vec();
    let mut eta = x0.to_vec();
    let mut rk_x = Rk4::new(x.len());
    let mut rk_eta = Rk4::new(x.len());
    let mut out = Deviation {
        max_deviation: 0.0,
        at_time: 0.0,
        diverged: false,
    };
    for k in 0..n_steps {
        let t = k as f64 * h;
        rk_x.step(&rot, t, h, &mut x);
        rk_eta.step(&avg, t, h, &mut eta);
        if blown_up(&x) || blown_up(&eta) {
            out.diverged = true;
            break;
        }
        let d = x
            .iter()
            .zip(&eta)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d > out.max_deviation {
            out.max_deviation = d;
            out.at_time = (k + 1) as f64 * h;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeStatus {
    Checked,
    PreconditionUnmet(String),
}

/// Sampled forward-invariance checks on an averaged trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub status: ProbeStatus,
    /// Every block stays in the `ρ`-wedge of the initial state.
    pub wedge_ok: bool,
    pub max_wedge_violation: f64,
    /// Cone angle never grows by more than the tolerance.
    pub angle_ok: bool,
    pub max_angle_increase: f64,
    /// `V` never grows by more than the tolerance while positive.
    pub lyapunov_ok: bool,
    pub max_lyapunov_increase: f64,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.status == ProbeStatus::Checked && self.wedge_ok && self.angle_ok && self.lyapunov_ok
    }

    fn declined(reason: impl Into<String>) -> Self {
        InvarianceReport {
            status: ProbeStatus::PreconditionUnmet(reason.into()),
            wedge_ok: false,
            max_wedge_violation: f64::NAN,
            angle_ok: false,
            max_angle_increase: f64::NAN,
            lyapunov_ok: false,
            max_lyapunov_increase: f64::NAN,
        }
    }
}

pub fn invariance_probe(traj: &Trajectory, rho: f64, tol: f64) -> InvarianceReport {
    if traj.system != SystemTag::Averaged {
        return InvarianceReport::declined("probe needs an averaged-array trajectory");
    }
    let Some(x0) = traj.states.first() else {
        return InvarianceReport::declined("empty trajectory");
    };
    let pts: Vec<[f64; 2]> = x0.blocks().collect();
    let Some(wedge) = wedge_of(&pts, rho) else {
        return InvarianceReport::declined("initial states do not lie in an open semicircle");
    };

    let mut max_wedge: f64 = 0.0;
    let mut max_angle: f64 = 0.0;
    let mut max_v: f64 = 0.0;
    let mut angle_defined = true;
    let mut prev_angle = cone_angle(x0);
    let mut prev_v = lyapunov_v(x0, rho);
    for x in &traj.states[1..] {
        for b in x.blocks() {
            max_wedge = max_wedge.max(wedge.violation(b));
        }
        let angle = cone_angle(x);
        match (prev_angle, angle) {
            (Some(a), Some(b)) => max_angle = max_angle.max(b - a),
            _ => angle_defined = false,
        }
        prev_angle = angle;
        let v = lyapunov_v(x, rho);
        if prev_v > 0.0 {
            max_v = max_v.max(v - prev_v);
        }
        prev_v = v;
    }
    InvarianceReport {
        status: ProbeStatus::Checked,
        wedge_ok: max_wedge <= tol,
        max_wedge_violation: max_wedge,
        angle_ok: angle_defined && max_angle <= tol,
        max_angle_increase: max_angle,
        lyapunov_ok: max_v <= tol,
        max_lyapunov_increase: max_v,
    }
}
