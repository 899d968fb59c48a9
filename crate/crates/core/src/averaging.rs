//! Period-averaged vector fields.
//!
//! Averaging the rotating-frame field over one period gives radial fields:
//! the damping averages to `f̄(v) = κ(|v|) v/|v|` with
//!
//! ```text
//! κ(s) = (2/π) ∫₀^s f(σ) √(1 − σ²/s²) dσ = (2/π) ∫₀^{π/2} f(s sin θ) s cos²θ dθ
//! ```
//!
//! and each coupling averages to `γ̄_ij(v) = ρ_ij(|v|) v/|v|` with
//!
//! ```text
//! ρ_ij(s) = (1/2π) ∫₀^{2π} γ_ij(s sin φ) sin φ dφ.
//! ```
//!
//! The positive root `ρ` of `κ` is the synchronization amplitude. Both
//! radial fields vanish at the origin and are extended by zero there.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::coupling_graph::CouplingFunction;
use crate::dynamics::{DampingSpec, DynamicsError, Network, StateVec};
pub use crate::quadrature::QuadratureConfig;
use crate::quadrature::{integrate, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("magnitude must be nonnegative and finite, got {0}")]
    BadMagnitude(f64),
    #[error("damping has no zero crossing s0 of its antiderivative")]
    NoLandmark,
    #[error("kappa is not negative anywhere below s0 = {0}")]
    NoNegativeBracket(f64),
    #[error("kappa stayed nonpositive up to the search cap {cap}")]
    BracketExpansion { cap: f64 },
    #[error("bisection ended with |kappa(rho)| = {residual:.3e} at rho = {rho}")]
    RootResidual { rho: f64, residual: f64 },
}

/// Bisection stops once the bracket is this narrow.
pub const RHO_BRACKET_TOL: f64 = 1e-10;
/// Largest accepted `|κ(ρ)|`.
pub const RHO_RESIDUAL_TOL: f64 = 1e-8;
/// Upper-bracket search cap as a multiple of `s0`.
pub const RHO_SEARCH_CAP: f64 = 1e3;

fn check_magnitude(s: f64) -> Result<(), AveragingError> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(AveragingError::BadMagnitude(s))
    }
}

/// Radial profile of the averaged damping.
pub fn kappa(d: &DampingSpec, s: f64, q: &QuadratureConfig) -> Result<f64, AveragingError> {
    check_magnitude(s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let est = integrate(
        |theta: f64| {
            let c = theta.cos();
            d.f(s * theta.sin()) * s * c * c
        },
        0.0,
        FRAC_PI_2,
        q,
    )?;
    Ok(2.0 / PI * est.value)
}

/// Radial profile of the averaged coupling; nonnegative for sign-correct `γ`.
pub fn rho_coupling(g: &CouplingFunction, s: f64, q: &QuadratureConfig) -> Result<f64, AveragingError> {
    check_magnitude(s)?;
    if s == 0.0 || g.is_zero() {
        return Ok(0.0);
    }
    let est = integrate(
        |phi: f64| {
            let sn = phi.sin();
            g.eval(s * sn) * sn
        },
        0.0,
        2.0 * PI,
        q,
    )?;
    Ok(est.value / (2.0 * PI))
}

fn radial(profile: f64, v: [f64; 2], norm: f64) -> [f64; 2] {
    if norm == 0.0 {
        [0.0, 0.0]
    } else {
        [profile * v[0] / norm, profile * v[1] / norm]
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// `f̄(v) = κ(|v|) v/|v|`, zero at the origin.
pub fn f_bar(d: &DampingSpec, v: [f64; 2], q: &QuadratureConfig) -> Result<[f64; 2], AveragingError> {
    let r = norm(v);
    Ok(radial(kappa(d, r, q)?, v, r))
}

/// `γ̄(v) = ρ(|v|) v/|v|`, zero at the origin.
pub fn gamma_bar(g: &CouplingFunction, v: [f64; 2], q: &QuadratureConfig) -> Result<[f64; 2], AveragingError> {
    let r = norm(v);
    Ok(radial(rho_coupling(g, r, q)?, v, r))
}

/// Synchronization amplitude: the unique positive root of `κ`.
///
/// The lower bracket is taken below `s0` where `κ < 0`; the upper bracket
/// doubles from `s0` until `κ > 0`, giving up at `1e3·s0`.
pub fn find_rho(d: &DampingSpec, q: &QuadratureConfig) -> Result<f64, AveragingError> {
    let s0 = d.s0().ok_or(AveragingError::NoLandmark)?;
    let k = |s: f64| kappa(d, s, q);

    let mut lo = 0.5 * s0;
    let mut tries = 0;
    while k(lo)? >= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(AveragingError::NoNegativeBracket(s0));
        }
    }
    let cap = RHO_SEARCH_CAP * s0;
    let mut hi = s0;
    while k(hi)? <= 0.0 {
        if hi >= cap {
            return Err(AveragingError::BracketExpansion { cap });
        }
        lo = lo.max(hi);
        hi = (2.0 * hi).min(cap);
    }
    while hi - lo > RHO_BRACKET_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if k(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    let residual = k(rho)?.abs();
    if residual > RHO_RESIDUAL_TOL {
        return Err(AveragingError::RootResidual { rho, residual });
    }
    Ok(rho)
}

/// Tabulated radial profile on a log-spaced grid with 4-point cubic
/// interpolation. Below the first node it is linear to zero; beyond the last
/// node it falls back to quadrature.
#[derive(Debug, Clone)]
struct ProfileTable {
    log_min: f64,
    log_step: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl ProfileTable {
    fn build(
        points: usize,
        s_min: f64,
        s_max: f64,
        f: impl Fn(f64) -> Result<f64, AveragingError>,
    ) -> Result<Self, AveragingError> {
        let log_min = s_min.ln();
        let log_step = (s_max.ln() - log_min) / (points - 1) as f64;
        let nodes: Vec<f64> = (0..points).map(|k| (log_min + k as f64 * log_step).exp()).collect();
        let values = nodes.iter().map(|&s| f(s)).collect::<Result<Vec<_>, _>>()?;
        Ok(ProfileTable {
            log_min,
            log_step,
            nodes,
            values,
        })
    }

    fn s_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.nodes.len();
        if s <= 0.0 {
            return 0.0;
        }
        if s < self.nodes[0] {
            return self.values[0] * s / self.nodes[0];
        }
        let k = ((s.ln() - self.log_min) / self.log_step).floor() as usize;
        let start = k.saturating_sub(1).min(n - 4);
        let xs = &self.nodes[start..start + 4];
        let ys = &self.values[start..start + 4];
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (s - xs[b]) / (xs[a] - xs[b]);
                }
            }
            acc += w * ys[a];
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub quadrature: QuadratureConfig,
    /// Evaluate profiles by quadrature on every call instead of tabulating.
    pub exact: bool,
    pub table_points: usize,
    pub table_min: f64,
    pub table_max: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            quadrature: QuadratureConfig::default(),
            exact: false,
            table_points: 2048,
            table_min: 1e-6,
            table_max: 1e3,
        }
    }
}

#[derive(Debug, Clone)]
enum Profile {
    Zero,
    Table(ProfileTable),
    Exact,
}

/// Averaged array for a given network. Immutable once built.
#[derive(Debug, Clone)]
pub struct AveragedModel {
    source: Network,
    options: ModelOptions,
    kappa: Profile,
    rho_ij: Vec<Profile>,
    rho: Option<f64>,
}

impl AveragedModel {
    pub fn new(net: &Network) -> Result<Self, AveragingError> {
        Self::with_options(net, ModelOptions::default())
    }

    pub fn exact(net: &Network) -> Result<Self, AveragingError> {
        Self::with_options(
            net,
            ModelOptions {
                exact: true,
                ..Default::default()
            },
        )
    }

    pub fn with_options(net: &Network, options: ModelOptions) -> Result<Self, AveragingError> {
        let q = options.quadrature;
        let tabulate = |f: &dyn Fn(f64) -> Result<f64, AveragingError>| {
            if options.exact {
                Ok(Profile::Exact)
            } else {
                ProfileTable::build(options.table_points.max(4), options.table_min, options.table_max, f)
                    .map(Profile::Table)
            }
        };
        let (kappa_profile, rho) = match net.damping() {
            Some(d) => (tabulate(&|s| kappa(d, s, &q))?, Some(find_rho(d, &q)?)),
            None => (Profile::Zero, None),
        };
        let ic = net.interconnection();
        let m = net.m();
        let mut rho_ij = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let g = ic.get(i, j);
                rho_ij.push(if g.is_zero() {
                    Profile::Zero
                } else {
                    tabulate(&|s| rho_coupling(g, s, &q))?
                });
            }
        }
        Ok(AveragedModel {
            source: net.clone(),
            options,
            kappa: kappa_profile,
            rho_ij,
            rho,
        })
    }

    pub fn network(&self) -> &Network {
        &self.source
    }

    pub fn m(&self) -> usize {
        self.source.m()
    }

    /// Synchronization amplitude; `None` for harmonic networks.
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    fn eval_profile(&self, p: &Profile, s: f64, exact: impl Fn(f64) -> Result<f64, AveragingError>) -> f64 {
        let fallback = |s: f64| match exact(s) {
            Ok(v) => v,
            Err(AveragingError::Quadrature(QuadratureError::NotConverged { estimate, .. })) => estimate,
            Err(_) => f64::NAN,
        };
        match p {
            Profile::Zero => 0.0,
            Profile::Exact => fallback(s),
            Profile::Table(t) if s > t.s_max() => fallback(s),
            Profile::Table(t) => t.eval(s),
        }
    }

    /// `κ(s)`; zero for harmonic networks.
    pub fn kappa(&self, s: f64) -> f64 {
        let q = self.options.quadrature;
        match self.source.damping() {
            Some(d) => self.eval_profile(&self.kappa, s, |s| kappa(d, s, &q)),
            None => 0.0,
        }
    }

    /// `ρ_ij(s)`.
    pub fn rho_ij(&self, i: usize, j: usize, s: f64) -> f64 {
        let q = self.options.quadrature;
        let g = self.source.interconnection().get(i, j);
        self.eval_profile(&self.rho_ij[i * self.m() + j], s, |s| rho_coupling(g, s, &q))
    }

    pub(crate) fn field(&self, eta: &[f64], out: &mut [f64]) {
        let m = self.m();
        let damped = self.source.damping().is_some();
        for i in 0..m {
            let ei = [eta[2 * i], eta[2 * i + 1]];
            let mut d = [0.0, 0.0];
            if damped {
                let r = norm(ei);
                let fb = radial(self.kappa(r), ei, r);
                d[0] -= fb[0];
                d[1] -= fb[1];
            }
            for j in 0..m {
                if matches!(self.rho_ij[i * m + j], Profile::Zero) {
                    continue;
                }
                let diff = [eta[2 * j] - ei[0], eta[2 * j + 1] - ei[1]];
                let r = norm(diff);
                let gb = radial(self.rho_ij(i, j, r), diff, r);
                d[0] += gb[0];
                d[1] += gb[1];
            }
            out[2 * i] = d[0];
            out[2 * i + 1] = d[1];
        }
    }
}

/// Averaged right-hand side: `−f̄(η_i) + Σ_j γ̄_ij(η_j − η_i)`, or the coupling
/// sum alone for harmonic networks.
pub fn average_rhs(eta: &StateVec, model: &AveragedModel) -> Result<StateVec, AveragingError> {
    model.source.check_dim(eta.len())?;
    let mut out = vec![0.0; eta.len()];
    model.field(eta, &mut out);
    Ok(StateVec::new(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling_graph::Interconnection;
    use crate::dynamics::{polynomial_damping, vdp_damping};

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn vdp_kappa(eps: f64, s: f64) -> f64 {
        eps * s * (s * s / 8.0 - 0.5)
    }

    #[test]
    fn kappa_examples() {
        let d = vdp_damping(1.0).unwrap();
        assert!(kappa(&d, 2.0, &q()).unwrap().abs() < 1e-12);
        assert!((kappa(&d, 1.0, &q()).unwrap() + 0.375).abs() < 1e-12);
        assert_eq!(kappa(&d, 0.0, &q()).unwrap(), 0.0);
        for eps in [0.3, 2.5] {
            let d = vdp_damping(eps).unwrap();
            for s in [0.1, 0.7, 1.9, 3.3, 12.0] {
                let k = kappa(&d, s, &q()).unwrap();
                assert!((k - vdp_kappa(eps, s)).abs() < 1e-11 * (1.0 + s.powi(3)));
            }
        }
        assert!(kappa(&d, -1.0, &q()).is_err());
    }

    #[test]
    fn rho_coupling_examples() {
        let lin = CouplingFunction::linear(1.7).unwrap();
        for s in [0.1, 1.0, 3.3] {
            assert!((rho_coupling(&lin, s, &q()).unwrap() - 1.7 * s / 2.0).abs() < 1e-10);
        }
        assert_eq!(rho_coupling(&CouplingFunction::zero(), 2.0, &q()).unwrap(), 0.0);
        let cubic = CouplingFunction::cubic(1.0).unwrap();
        assert!((rho_coupling(&cubic, 1.0, &q()).unwrap() - 0.375).abs() < 1e-10);
    }

    #[test]
    fn f_bar_and_gamma_bar_examples() {
        let d = vdp_damping(1.0).unwrap();
        let v = f_bar(&d, [2.0, 0.0], &q()).unwrap();
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
        assert_eq!(f_bar(&d, [0.0, 0.0], &q()).unwrap(), [0.0, 0.0]);
        let v = f_bar(&d, [0.0, 1.0], &q()).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] + 0.375).abs() < 1e-12);

        let lin = CouplingFunction::linear(2.0).unwrap();
        let g = gamma_bar(&lin, [3.0, 4.0], &q()).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-10 && (g[1] - 4.0).abs() < 1e-10);
        assert_eq!(gamma_bar(&lin, [0.0, 0.0], &q()).unwrap(), [0.0, 0.0]);
        assert_eq!(gamma_bar(&CouplingFunction::zero(), [1.0, 1.0], &q()).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn find_rho_examples() {
        for eps in [0.3, 1.0, 3.0] {
            let rho = find_rho(&vdp_damping(eps).unwrap(), &q()).unwrap();
            assert!((rho - 2.0).abs() < 1e-6, "eps={eps}: {rho}");
        }
        let poly = polynomial_damping(vec![-1.0, 0.0, 1.0]).unwrap();
        assert!((find_rho(&poly, &q()).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn find_rho_reports_missing_landmark() {
        let constant = polynomial_damping(vec![1.0]).unwrap();
        assert_eq!(find_rho(&constant, &q()), Err(AveragingError::NoLandmark));
    }

    #[test]
    fn find_rho_reports_bracket_failure() {
        // f = -1 + s^2 - 0.13 s^4: F still crosses zero, but κ(s) = s(-1/2 + s²/8 - 0.13 s⁴/16) never does
        let d = polynomial_damping(vec![-1.0, 0.0, 1.0, 0.0, -0.13]).unwrap();
        assert!(d.s0().is_some());
        assert!(matches!(find_rho(&d, &q()), Err(AveragingError::BracketExpansion { .. })));
    }

    #[test]
    fn average_rhs_examples() {
        let single = Network::lienard(1.0, Interconnection::uncoupled(1).unwrap(), vdp_damping(1.0).unwrap()).unwrap();
        let model = AveragedModel::new(&single).unwrap();
        let d = average_rhs(&StateVec::from_blocks(&[[2.0, 0.0]]).unwrap(), &model).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-9));

        let lin = CouplingFunction::linear(2.0).unwrap();
        let ic = Interconnection::from_entries(2, [(0, 1, lin.clone()), (1, 0, lin)]).unwrap();
        let harm = AveragedModel::new(&Network::harmonic(1.0, ic.clone()).unwrap()).unwrap();
        let eq = StateVec::from_blocks(&[[0.3, -0.4], [0.3, -0.4]]).unwrap();
        assert!(average_rhs(&eq, &harm).unwrap().iter().all(|&v| v == 0.0));

        let lien = AveragedModel::new(&Network::lienard(1.0, ic, vdp_damping(1.0).unwrap()).unwrap()).unwrap();
        let on_r = StateVec::from_blocks(&[[2.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!(average_rhs(&on_r, &lien).unwrap().iter().all(|v| v.abs() < 1e-9));
        assert!(average_rhs(&StateVec::zeros(3), &lien).is_err());
    }

    #[test]
    fn table_matches_exact_quadrature() {
        let ic = Interconnection::from_entries(
            2,
            [
                (0, 1, CouplingFunction::saturating(1.5, 0.7).unwrap()),
                (
                    1,
                    0,
                    CouplingFunction::custom(vec![[-2.0, -1.5], [-1.0, -1.0], [0.0, 0.0], [1.0, 1.0], [2.0, 1.5]])
                        .unwrap(),
                ),
            ],
        )
        .unwrap();
        let net = Network::lienard(1.0, ic, vdp_damping(0.7).unwrap()).unwrap();
        let fast = AveragedModel::new(&net).unwrap();
        let slow = AveragedModel::exact(&net).unwrap();
        let mut s = 1e-7;
        while s < 2e3 {
            let k = (fast.kappa(s) - slow.kappa(s)).abs();
            assert!(k <= 1e-8 * slow.kappa(s).abs().max(1.0), "kappa at {s}: {k}");
            for (i, j) in [(0, 1), (1, 0)] {
                let e = (fast.rho_ij(i, j, s) - slow.rho_ij(i, j, s)).abs();
                assert!(e <= 1e-7 * slow.rho_ij(i, j, s).abs().max(1e-3), "rho_{i}{j} at {s}: {e}");
            }
            s *= 1.37;
        }
        assert_eq!(fast.rho(), slow.rho());
    }
}
