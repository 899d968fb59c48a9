//! Right-hand sides of the oscillator arrays.
//!
//! Each oscillator has state `ξ_i = (q_i, p_i)` and the flat state vector is
//! interleaved: `[q1, p1, q2, p2, ...]`. The Lienard array reads
//!
//! ```text
//! q̇_i = ω p_i
//! ṗ_i = −ω q_i − f(q_i) p_i + Σ_j γ_ij(p_j − p_i)
//! ```
//!
//! and the harmonic array drops the damping term. With position coupling the
//! sum moves to the `q̇_i` equation and takes `q_j − q_i`.
//!
//! Rotating frame: with `S(ω) = [[0, ω], [−ω, 0]]`,
//! `exp(S t) = [[cos ωt, sin ωt], [−sin ωt, cos ωt]]` and the frame change is
//! `x_i = exp(−S t) ξ_i = [[cos ωt, −sin ωt], [sin ωt, cos ωt]] ξ_i`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling_graph::Interconnection;
use crate::quadrature::{integrate, QuadratureConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state length {0} is not even")]
    OddLength(usize),
    #[error("state contains a non-finite entry")]
    NonFinite,
    #[error("frequency must be positive and finite, got {0}")]
    BadOmega(f64),
    #[error("damping parameter epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("polynomial damping needs finite coefficients")]
    BadPolynomial,
    #[error("Lienard right-hand side needs a damping function")]
    MissingDamping,
    #[error("harmonic right-hand side called on a damped network")]
    UnexpectedDamping,
}

/// Flat `2m` state vector, `[q1, p1, ..., qm, pm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec(Vec<f64>);

impl StateVec {
    pub fn new(data: Vec<f64>) -> Result<Self, DynamicsError> {
        if data.len() % 2 != 0 {
            return Err(DynamicsError::OddLength(data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite);
        }
        Ok(StateVec(data))
    }

    pub fn from_blocks(blocks: &[[f64; 2]]) -> Result<Self, DynamicsError> {
        Self::new(blocks.iter().flatten().copied().collect())
    }

    pub fn zeros(m: usize) -> Self {
        StateVec(vec![0.0; 2 * m])
    }

    pub fn m(&self) -> usize {
        self.0.len() / 2
    }

    pub fn block(&self, i: usize) -> [f64; 2] {
        [self.0[2 * i], self.0[2 * i + 1]]
    }

    pub fn blocks(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.0.chunks_exact(2).map(|c| [c[0], c[1]])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Damping families. `f` must be even and its antiderivative `F` must be
/// negative on `(0, s0)` and positive, nondecreasing, unbounded beyond `s0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DampingKind {
    /// `f(s) = ε (s² − 1)`.
    VanDerPol { epsilon: f64 },
    /// `f(s) = Σ_k c_k s^k`.
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampingSpec {
    kind: DampingKind,
    s0: Option<f64>,
}

impl DampingSpec {
    pub fn new(kind: DampingKind) -> Result<Self, DynamicsError> {
        match &kind {
            DampingKind::VanDerPol { epsilon } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(DynamicsError::BadEpsilon(*epsilon));
                }
                Ok(DampingSpec {
                    kind,
                    s0: Some(3f64.sqrt()),
                })
            }
            DampingKind::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(DynamicsError::BadPolynomial);
                }
                let mut spec = DampingSpec { kind, s0: None };
                spec.s0 = spec.locate_s0();
                Ok(spec)
            }
        }
    }

    pub fn kind(&self) -> &DampingKind {
        &self.kind
    }

    /// Positive zero of `F` preceded by a negative stretch, if one exists.
    pub fn s0(&self) -> Option<f64> {
        self.s0
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        match &self.kind {
            DampingKind::VanDerPol { epsilon } => epsilon * (s * s - 1.0),
            DampingKind::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
        }
    }

    /// `F(s) = ∫₀^s f`.
    pub fn antiderivative(&self, s: f64) -> f64 {
        match &self.kind {
            DampingKind::VanDerPol { epsilon } => epsilon * (s * s * s / 3.0 - s),
            DampingKind::Polynomial { coefficients } => {
                let acc = coefficients
                    .iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * s + c / (k + 1) as f64);
                acc * s
            }
        }
    }

    fn locate_s0(&self) -> Option<f64> {
        // log-spaced scan of (0, 1e4], then bisection on the first sign change
        let n = 4000;
        let (lo_exp, hi_exp) = (-6.0f64, 4.0f64);
        let at = |k: usize| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / n as f64);
        if !(self.antiderivative(at(0)) < 0.0) {
            return None;
        }
        let k = (1..=n).find(|&k| self.antiderivative(at(k)) >= 0.0)?;
        let (mut lo, mut hi) = (at(k - 1), at(k));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.antiderivative(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }
}

/// Van der Pol damping `f(s) = ε(s² − 1)`, `F(s) = ε(s³/3 − s)`, `s0 = √3`.
pub fn vdp_damping(epsilon: f64) -> Result<DampingSpec, DynamicsError> {
    DampingSpec::new(DampingKind::VanDerPol { epsilon })
}

pub fn polynomial_damping(coefficients: Vec<f64>) -> Result<DampingSpec, DynamicsError> {
    DampingSpec::new(DampingKind::Polynomial { coefficients })
}

/// Outcome of the damping checks on a finite window `(0, S_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingReport {
    /// `f(−s) = f(s)` on the grid.
    pub even: bool,
    pub s0: Option<f64>,
    /// `F < 0` on sampled `(0, s0)`.
    pub negative_below_s0: bool,
    /// `F > 0` and nondecreasing on sampled `(s0, S_max]`.
    pub positive_nondecreasing_above_s0: bool,
    /// `F` still growing across the upper half of the window.
    pub growing: bool,
    /// `F(s)` agrees with a quadrature of `f`.
    pub antiderivative_consistent: bool,
    pub max_antiderivative_error: f64,
}

impl DampingReport {
    pub fn passed(&self) -> bool {
        self.even
            && self.s0.is_some()
            && self.negative_below_s0
            && self.positive_nondecreasing_above_s0
            && self.growing
            && self.antiderivative_consistent
    }
}

/// Default validation window: 400 points uniform on `(0, 10·s0]`, or `(0, 10]`
/// when no `s0` was found.
pub fn default_damping_grid(d: &DampingSpec) -> Vec<f64> {
    let s_max = 10.0 * d.s0().unwrap_or(1.0);
    let n = 400;
    (1..=n).map(|k| s_max * k as f64 / n as f64).collect()
}

pub fn validate_damping(d: &DampingSpec, grid: &[f64]) -> DampingReport {
    let even = grid.iter().all(|&s| {
        let (a, b) = (d.f(s), d.f(-s));
        (a - b).abs() <= 1e-12 * a.abs().max(1.0)
    });

    let quad = QuadratureConfig::with_tolerance(1e-12);
    let mut max_err: f64 = 0.0;
    for &s in grid {
        let err = match integrate(|x| d.f(x), 0.0, s, &quad) {
            Ok(est) => (est.value - d.antiderivative(s)).abs() / d.antiderivative(s).abs().max(1.0),
            Err(_) => f64::INFINITY,
        };
        max_err = max_err.max(err);
    }

    let s0 = d.s0();
    let (negative_below_s0, positive_nondecreasing_above_s0, growing) = match s0 {
        None => (false, false, false),
        Some(s0) => {
            let neg = grid
                .iter()
                .filter(|&&s| s > 0.0 && s < s0)
                .all(|&s| d.antiderivative(s) < 0.0);
            let above: Vec<f64> = grid
                .iter()
                .filter(|&&s| s > s0)
                .map(|&s| d.antiderivative(s))
                .collect();
            let pos = !above.is_empty()
                && above.iter().all(|&v| v > 0.0)
                && above.windows(2).all(|w| w[1] >= w[0]);
            let growing = match (above.get(above.len() / 2), above.last()) {
                (Some(mid), Some(last)) => last > mid,
                _ => false,
            };
            (neg, pos, growing)
        }
    };

    DampingReport {
        even,
        s0,
        negative_below_s0,
        positive_nondecreasing_above_s0,
        growing,
        antiderivative_consistent: max_err <= 1e-8,
        max_antiderivative_error: max_err,
    }
}

/// Which state component carries the coupling: `V = [0 1]` or `H = [1 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    #[default]
    Velocity,
    Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    omega: f64,
    interconnection: Interconnection,
    damping: Option<DampingSpec>,
    projection: Projection,
}

impl Network {
    pub fn new(
        omega: f64,
        interconnection: Interconnection,
        damping: Option<DampingSpec>,
        projection: Projection,
    ) -> Result<Self, DynamicsError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(DynamicsError::BadOmega(omega));
        }
        Ok(Network {
            omega,
            interconnection,
            damping,
            projection,
        })
    }

    pub fn lienard(omega: f64, ic: Interconnection, damping: DampingSpec) -> Result<Self, DynamicsError> {
        Self::new(omega, ic, Some(damping), Projection::Velocity)
    }

    pub fn harmonic(omega: f64, ic: Interconnection) -> Result<Self, DynamicsError> {
        Self::new(omega, ic, None, Projection::Velocity)
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self, DynamicsError> {
        Self::new(omega, self.interconnection.clone(), self.damping.clone(), self.projection)
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = projection;
        self
    }

    pub fn m(&self) -> usize {
        self.interconnection.m()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn interconnection(&self) -> &Interconnection {
        &self.interconnection
    }

    pub fn damping(&self) -> Option<&DampingSpec> {
        self.damping.as_ref()
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn is_harmonic(&self) -> bool {
        self.damping.is_none()
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<(), DynamicsError> {
        if len != 2 * self.m() {
            return Err(DynamicsError::DimensionMismatch {
                expected: 2 * self.m(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Original-coordinates vector field, damped or harmonic depending on `net`.
pub(crate) fn original_field(net: &Network, xi: &[f64], out: &mut [f64]) {
    let m = net.m();
    let w = net.omega;
    let ic = &net.interconnection;
    for i in 0..m {
        let (q, p) = (xi[2 * i], xi[2 * i + 1]);
        let mut dq = w * p;
        let mut dp = -w * q;
        if let Some(d) = &net.damping {
            dp -= d.f(q) * p;
        }
        let c = match net.projection {
            Projection::Velocity => 1,
            Projection::Position => 0,
        };
        let own = xi[2 * i + c];
        let mut sum = 0.0;
        for j in 0..m {
            let g = ic.get(i, j);
            if !g.is_zero() {
                sum += g.eval(xi[2 * j + c] - own);
            }
        }
        if c == 1 {
            dp += sum;
        } else {
            dq += sum;
        }
        out[2 * i] = dq;
        out[2 * i + 1] = dp;
    }
}

/// Rotating-frame vector field at phase `ωt`.
pub(crate) fn rotating_field(net: &Network, phase: f64, x: &[f64], out: &mut [f64]) {
    let m = net.m();
    let (s, c) = phase.sin_cos();
    // H e^{St} = [c, s], V e^{St} = [-s, c]
    let proj_h = |v: [f64; 2]| c * v[0] + s * v[1];
    let proj_v = |v: [f64; 2]| -s * v[0] + c * v[1];
    let ic = &net.interconnection;
    for i in 0..m {
        let xi = [x[2 * i], x[2 * i + 1]];
        let mut d = [0.0, 0.0];
        if let Some(damp) = &net.damping {
            let k = -damp.f(proj_h(xi)) * proj_v(xi);
            d[0] += -s * k;
            d[1] += c * k;
        }
        for j in 0..m {
            let g = ic.get(i, j);
            if g.is_zero() {
                continue;
            }
            let diff = [x[2 * j] - xi[0], x[2 * j + 1] - xi[1]];
            match net.projection {
                Projection::Velocity => {
                    let y = g.eval(proj_v(diff));
                    d[0] += -s * y;
                    d[1] += c * y;
                }
                Projection::Position => {
                    let y = g.eval(proj_h(diff));
                    d[0] += c * y;
                    d[1] += s * y;
                }
            }
        }
        out[2 * i] = d[0];
        out[2 * i + 1] = d[1];
    }
}

fn eval_with(
    net: &Network,
    x: &StateVec,
    field: impl Fn(&Network, &[f64], &mut [f64]),
) -> Result<StateVec, DynamicsError> {
    net.check_dim(x.len())?;
    let mut out = vec![0.0; x.len()];
    field(net, x, &mut out);
    Ok(StateVec(out))
}

/// `dξ/dt` of the damped (Lienard) array.
pub fn lienard_rhs(xi: &StateVec, net: &Network) -> Result<StateVec, DynamicsError> {
    if net.is_harmonic() {
        return Err(DynamicsError::MissingDamping);
    }
    eval_with(net, xi, original_field)
}

/// `dξ/dt` of the harmonic array.
pub fn harmonic_rhs(xi: &StateVec, net: &Network) -> Result<StateVec, DynamicsError> {
    if !net.is_harmonic() {
        return Err(DynamicsError::UnexpectedDamping);
    }
    eval_with(net, xi, original_field)
}

/// `dx/dt` in the rotating frame at phase `ωt`; 2π-periodic in the phase.
pub fn transformed_rhs(x: &StateVec, phase: f64, net: &Network) -> Result<StateVec, DynamicsError> {
    eval_with(net, x, |n, x, out| rotating_field(n, phase, x, out))
}

/// Rotates every block by `angle` (counterclockwise).
pub(crate) fn rotate_blocks(v: &[f64], angle: f64, out: &mut [f64]) {
    let (s, c) = angle.sin_cos();
    for (src, dst) in v.chunks_exact(2).zip(out.chunks_exact_mut(2)) {
        dst[0] = c * src[0] - s * src[1];
        dst[1] = s * src[0] + c * src[1];
    }
}

/// `x_i = exp(−S(ω)t) ξ_i`: counterclockwise rotation by `ωt`.
pub fn rotating_frame(xi: &StateVec, t: f64, omega: f64) -> StateVec {
    let mut out = vec![0.0; xi.len()];
    rotate_blocks(xi, omega * t, &mut out);
    StateVec(out)
}

/// `ξ_i = exp(S(ω)t) x_i`, the inverse of [`rotating_frame`].
pub fn from_rotating_frame(x: &StateVec, t: f64, omega: f64) -> StateVec {
    let mut out = vec![0.0; x.len()];
    rotate_blocks(x, -omega * t, &mut out);
    StateVec(out)
}
