//! Scenario files: a single TOML document describing the network, the
//! initial conditions, the integrator and the experiment to run.
//!
//! Units: `omega` in radians per unit time, every time (`step`, `horizon`,
//! settle times) in model time units, every angle (`arc_center`,
//! `arc_width`) in radians. Oscillator indices are 1-based.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::coupling_graph::{
    graph_of, is_connected, make_coupling, CouplingKind, Interconnection, SampleGrid,
    validate_interconnection,
};
use crate::dynamics::{default_damping_grid, validate_damping, DampingKind, DampingSpec, Network, Projection, StateVec};
use crate::simulate::IntegratorConfig;

/// Identifier of the initial-condition sampler, echoed in summaries.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64; polar sampling, radius area-uniform";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    SingleRun,
    OmegaSweep,
    OmegaStarSearch,
    AverageVsOriginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemChoice {
    #[default]
    Original,
    Rotating,
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OscillatorKind {
    #[default]
    Lienard,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    /// Driven oscillator.
    pub i: usize,
    /// Driving oscillator.
    pub j: usize,
    pub coupling: CouplingKind,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub oscillators: usize,
    pub omega: f64,
    /// Sweep frequencies.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub omegas: Vec<f64>,
    #[serde(default)]
    pub oscillator: OscillatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingKind>,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default = "yes")]
    pub require_connected: bool,
    #[serde(default)]
    pub coupling: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// One `[q, p]` pair per oscillator.
    Explicit { states: Vec<[f64; 2]> },
    /// Radius area-uniform in `[r_lo, r_hi]`, angle uniform in
    /// `arc_center ± arc_width / 2`.
    Annulus {
        r_lo: f64,
        r_hi: f64,
        arc_center: f64,
        arc_width: f64,
        seed: u64,
    },
    /// Uniform in the disk of the given radius.
    Anywhere { radius: f64, seed: u64 },
}

impl InitialSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialSpec::Explicit { .. } => None,
            InitialSpec::Annulus { seed, .. } | InitialSpec::Anywhere { seed, .. } => Some(*seed),
        }
    }

    /// Draws the initial state; `seed` replaces the stored seed when given.
    pub fn sample(&self, m: usize, seed: Option<u64>) -> Result<StateVec, HarnessError> {
        let blocks: Vec<[f64; 2]> = match self {
            InitialSpec::Explicit { states } => states.clone(),
            InitialSpec::Annulus {
                r_lo,
                r_hi,
                arc_center,
                arc_width,
                seed: stored,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(*stored));
                (0..m)
                    .map(|_| {
                        let theta = arc_center + arc_width * (rng.gen::<f64>() - 0.5);
                        let r = (r_lo * r_lo + rng.gen::<f64>() * (r_hi * r_hi - r_lo * r_lo)).sqrt();
                        [r * theta.cos(), r * theta.sin()]
                    })
                    .collect()
            }
            InitialSpec::Anywhere { radius, seed: stored } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(*stored));
                (0..m)
                    .map(|_| {
                        let theta = TAU * rng.gen::<f64>();
                        let r = radius * rng.gen::<f64>().sqrt();
                        [r * theta.cos(), r * theta.sin()]
                    })
                    .collect()
            }
        };
        if blocks.len() != m {
            return Err(HarnessError::Validation(format!(
                "initial.states: expected {m} oscillator states, got {}",
                blocks.len()
            )));
        }
        StateVec::from_blocks(&blocks).map_err(|e| HarnessError::Validation(format!("initial: {e}")))
    }
}

fn default_settle_threshold() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Residual level defining the settle time.
    #[serde(default = "default_settle_threshold")]
    pub settle_threshold: f64,
    /// Also run the averaged array and record the deviation.
    #[serde(default)]
    pub compute_deviation: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            settle_threshold: default_settle_threshold(),
            compute_deviation: false,
        }
    }
}

fn default_draws() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaStarSpec {
    /// Initial conditions per candidate frequency.
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Bound on the initial distance to the target set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Residual that must hold over the tail window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl Default for OmegaStarSpec {
    fn default() -> Self {
        OmegaStarSpec {
            draws: default_draws(),
            radius: None,
            residual: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; files are named after the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Also write the long-format `t,series,value` CSV.
    #[serde(default)]
    pub tidy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub system: SystemChoice,
    pub network: NetworkSpec,
    pub initial: InitialSpec,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub omega_star: OmegaStarSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Outcome of the network checks; `passed` gates every experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkCheck {
    pub couplings_ok: bool,
    pub damping_ok: bool,
    pub connected: bool,
    pub connectivity_required: bool,
    pub roots: Vec<usize>,
    pub messages: Vec<String>,
}

impl NetworkCheck {
    pub fn passed(&self) -> bool {
        self.couplings_ok && self.damping_ok && (self.connected || !self.connectivity_required)
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("couplings: {}\n", ok(self.couplings_ok)));
        out.push_str(&format!("damping: {}\n", ok(self.damping_ok)));
        out.push_str(&format!(
            "connected: {}{}",
            if self.connected { "yes" } else { "no" },
            if self.connectivity_required { " (required)" } else { "" }
        ));
        if !self.roots.is_empty() {
            let roots: Vec<String> = self.roots.iter().map(|r| (r + 1).to_string()).collect();
            out.push_str(&format!(", root nodes {}", roots.join(" ")));
        }
        out.push('\n');
        for m in &self.messages {
            out.push_str("  ");
            out.push_str(m);
            out.push('\n');
        }
        out
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        s.check_fields()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Other(format!("cannot serialize scenario: {e}")))
    }

    /// Field-level checks that do not need the numerics.
    fn check_fields(&self) -> Result<(), HarnessError> {
        let bad = |field: String, msg: String| Err(HarnessError::Parse(format!("{field}: {msg}")));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
            return bad("name".into(), "use letters, digits, '_', '-' or '.'".into());
        }
        let n = &self.network;
        let m = n.oscillators;
        if m == 0 {
            return bad("network.oscillators".into(), "must be at least 1".into());
        }
        if !(n.omega > 0.0 && n.omega.is_finite()) {
            return bad("network.omega".into(), format!("must be positive, got {}", n.omega));
        }
        if let Some(w) = n.omegas.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return bad("network.omegas".into(), format!("must be positive, got {w}"));
        }
        match (n.oscillator, &n.damping) {
            (OscillatorKind::Lienard, None) => {
                return bad("network.damping".into(), "required for lienard oscillators".into())
            }
            (OscillatorKind::Harmonic, Some(_)) => {
                return bad("network.damping".into(), "not allowed for harmonic oscillators".into())
            }
            _ => {}
        }
        let mut seen = std::collections::BTreeSet::new();
        for (k, e) in n.coupling.iter().enumerate() {
            let field = format!("network.coupling[{k}]");
            if e.i == 0 || e.i > m || e.j == 0 || e.j > m {
                return bad(field, format!("indices ({}, {}) outside 1..={m}", e.i, e.j));
            }
            if e.i == e.j {
                return bad(field, format!("self-coupling on oscillator {}", e.i));
            }
            if !seen.insert((e.i, e.j)) {
                return bad(field, format!("duplicate entry ({}, {})", e.i, e.j));
            }
        }
        match &self.initial {
            InitialSpec::Explicit { states } => {
                if states.len() != m {
                    return bad("initial.states".into(), format!("expected {m} entries, got {}", states.len()));
                }
            }
            InitialSpec::Annulus { r_lo, r_hi, arc_width, .. } => {
                if !(*r_lo >= 0.0 && r_lo < r_hi && r_hi.is_finite()) {
                    return bad("initial".into(), format!("need 0 <= r_lo < r_hi, got {r_lo}, {r_hi}"));
                }
                if !(*arc_width >= 0.0 && *arc_width <= TAU) {
                    return bad("initial.arc_width".into(), format!("must lie in [0, 2π], got {arc_width}"));
                }
            }
            InitialSpec::Anywhere { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad("initial.radius".into(), format!("must be positive, got {radius}"));
                }
            }
        }
        self.integrator
            .validate()
            .map_err(|e| HarnessError::Parse(format!("integrator: {e}")))?;
        if !(self.sweep.settle_threshold > 0.0) {
            return bad("sweep.settle_threshold".into(), "must be positive".into());
        }
        if self.omega_star.draws == 0 {
            return bad("omega_star.draws".into(), "must be at least 1".into());
        }
        Ok(())
    }

    pub fn damping(&self) -> Result<Option<DampingSpec>, HarnessError> {
        self.network
            .damping
            .clone()
            .map(DampingSpec::new)
            .transpose()
            .map_err(|e| HarnessError::Validation(format!("network.damping: {e}")))
    }

    pub fn interconnection(&self) -> Result<Interconnection, HarnessError> {
        let entries = self
            .network
            .coupling
            .iter()
            .enumerate()
            .map(|(k, e)| {
                make_coupling(e.coupling.clone())
                    .map(|g| (e.i - 1, e.j - 1, g))
                    .map_err(|err| HarnessError::Validation(format!("network.coupling[{k}]: {err}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Interconnection::from_entries(self.network.oscillators, entries)
            .map_err(|e| HarnessError::Validation(format!("network.coupling: {e}")))
    }

    /// The network at frequency `omega` (the scenario's own when `None`).
    pub fn build_network(&self, omega: Option<f64>) -> Result<Network, HarnessError> {
        Network::new(
            omega.unwrap_or(self.network.omega),
            self.interconnection()?,
            self.damping()?,
            self.network.projection,
        )
        .map_err(|e| HarnessError::Validation(format!("network: {e}")))
    }

    /// Coupling axioms, damping axioms and connectivity.
    pub fn check_network(&self) -> Result<NetworkCheck, HarnessError> {
        let ic = self.interconnection()?;
        let report = validate_interconnection(&ic, &SampleGrid::default());
        let mut messages = Vec::new();
        for e in report.failures() {
            messages.push(format!("coupling ({}, {}): {e:?}", e.i + 1, e.j + 1));
        }
        for e in report.entries.iter().filter(|e| e.passed() && !e.monotone) {
            messages.push(format!("coupling ({}, {}): table is not monotone", e.i + 1, e.j + 1));
        }
        let damping_ok = match self.damping()? {
            Some(d) => {
                let r = validate_damping(&d, &default_damping_grid(&d));
                if !r.passed() {
                    messages.push(format!("damping: {r:?}"));
                }
                r.passed()
            }
            None => true,
        };
        let g = graph_of(&ic);
        let connected = is_connected(&g);
        if !connected && self.network.require_connected {
            messages.push("graph has no node reachable from every other node".into());
        }
        Ok(NetworkCheck {
            couplings_ok: report.passed(),
            damping_ok,
            connected,
            connectivity_required: self.network.require_connected,
            roots: g.roots(),
            messages,
        })
    }
}
