//! Nonlinear interconnections `{γ_ij}` and their directed graphs.
//!
//! A coupling function `γ: R → R` must vanish at zero and lie in the first and
//! third quadrants (`s·γ(s) ≥ 0`). A nonzero coupling must additionally be
//! bounded away from zero by a class-K function of `|s|`; we check the
//! sampled surrogate `γ(s) ≠ 0` for `s ≠ 0`.
//!
//! Edge convention: `(i, j)` is an edge exactly when `γ_ij` is nonzero, i.e.
//! oscillator `i` is driven by the state of oscillator `j`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when checking odd symmetry of custom tables.
const ODD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("coupling gain must be positive and finite, got {0}")]
    NonPositiveGain(f64),
    #[error("saturation cap must be positive and finite, got {0}")]
    NonPositiveCap(f64),
    #[error("custom table: {0}")]
    BadTable(String),
    #[error("interconnection needs at least one oscillator")]
    Empty,
    #[error("interconnection of {m} oscillators needs {expected} entries, got {got}")]
    WrongSize { m: usize, expected: usize, got: usize },
    #[error("diagonal entry gamma[{0}][{0}] must be zero")]
    NonZeroDiagonal(usize),
    #[error("edge ({i}, {j}) out of range for {m} oscillators")]
    IndexOutOfRange { i: usize, j: usize, m: usize },
}

/// Odd-symmetric piecewise-linear lookup table.
///
/// Knots are strictly increasing, contain `(0, 0)`, and come in pairs
/// `(s, y)` / `(-s, -y)`. Outside the knot range the boundary segment's slope
/// is extended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TablePoints", into = "TablePoints")]
pub struct LookupTable {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TablePoints {
    points: Vec<[f64; 2]>,
}

impl TryFrom<TablePoints> for LookupTable {
    type Error = CouplingError;

    fn try_from(t: TablePoints) -> Result<Self, Self::Error> {
        LookupTable::new(t.points)
    }
}

impl From<LookupTable> for TablePoints {
    fn from(t: LookupTable) -> Self {
        TablePoints {
            points: t.knots.iter().zip(&t.values).map(|(&s, &y)| [s, y]).collect(),
        }
    }
}

impl LookupTable {
    pub fn new(mut points: Vec<[f64; 2]>) -> Result<Self, CouplingError> {
        if points.len() < 3 {
            return Err(CouplingError::BadTable(
                "need at least three points (-a, 0, a)".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CouplingError::BadTable("non-finite entry".into()));
        }
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(CouplingError::BadTable("duplicate abscissa".into()));
        }
        let n = points.len();
        for k in 0..n {
            let (lo, hi) = (points[k], points[n - 1 - k]);
            if (lo[0] + hi[0]).abs() > ODD_TOL || (lo[1] + hi[1]).abs() > ODD_TOL {
                return Err(CouplingError::BadTable(format!(
                    "not odd-symmetric: ({}, {}) has no mirror point",
                    lo[0], lo[1]
                )));
            }
        }
        // An odd table of odd length has its middle knot at (0, 0).
        if n % 2 == 0 {
            return Err(CouplingError::BadTable("table must contain (0, 0)".into()));
        }
        let mid = points[n / 2];
        if mid != [0.0, 0.0] {
            return Err(CouplingError::BadTable("table must contain (0, 0)".into()));
        }
        Ok(LookupTable {
            knots: points.iter().map(|p| p[0]).collect(),
            values: points.iter().map(|p| p[1]).collect(),
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        let k = &self.knots;
        let v = &self.values;
        let n = k.len();
        // segment index: the segment [k[idx], k[idx+1]] used for s, clamped to the ends
        let idx = match k.partition_point(|&x| x <= s) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let slope = (v[idx + 1] - v[idx]) / (k[idx + 1] - k[idx]);
        v[idx] + slope * (s - k[idx])
    }

    /// True when the tabulated values are nondecreasing.
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Parametric coupling families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CouplingKind {
    Zero,
    Linear { gain: f64 },
    Cubic { gain: f64 },
    /// `cap · tanh(gain · s / cap)`: slope `gain` at the origin, saturating at `±cap`.
    Saturating { gain: f64, cap: f64 },
    Custom(LookupTable),
}

/// A validated coupling function `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFunction {
    kind: CouplingKind,
}

impl CouplingFunction {
    pub fn zero() -> Self {
        CouplingFunction {
            kind: CouplingKind::Zero,
        }
    }

    pub fn linear(gain: f64) -> Result<Self, CouplingError> {
        make_coupling(CouplingKind::Linear { gain })
    }

    pub fn cubic(gain: f64) -> Result<Self, CouplingError> {
        make_coupling(CouplingKind::Cubic { gain })
    }

    pub fn saturating(gain: f64, cap: f64) -> Result<Self, CouplingError> {
        make_coupling(CouplingKind::Saturating { gain, cap })
    }

    pub fn custom(points: Vec<[f64; 2]>) -> Result<Self, CouplingError> {
        make_coupling(CouplingKind::Custom(LookupTable::new(points)?))
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, CouplingKind::Zero)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            CouplingKind::Zero => 0.0,
            CouplingKind::Linear { gain } => gain * s,
            CouplingKind::Cubic { gain } => gain * s * s * s,
            CouplingKind::Saturating { gain, cap } => cap * (gain * s / cap).tanh(),
            CouplingKind::Custom(table) => table.eval(s),
        }
    }
}

/// Builds a coupling function, rejecting out-of-range parameters.
pub fn make_coupling(kind: CouplingKind) -> Result<CouplingFunction, CouplingError> {
    let check_gain = |g: f64| {
        if g > 0.0 && g.is_finite() {
            Ok(())
        } else {
            Err(CouplingError::NonPositiveGain(g))
        }
    };
    match &kind {
        CouplingKind::Zero | CouplingKind::Custom(_) => {}
        CouplingKind::Linear { gain } | CouplingKind::Cubic { gain } => check_gain(*gain)?,
        CouplingKind::Saturating { gain, cap } => {
            check_gain(*gain)?;
            if !(*cap > 0.0 && cap.is_finite()) {
                return Err(CouplingError::NonPositiveCap(*cap));
            }
        }
    }
    Ok(CouplingFunction { kind })
}

/// An `m × m` matrix of coupling functions with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Interconnection {
    m: usize,
    gamma: Vec<CouplingFunction>,
}

impl Interconnection {
    /// Row-major entries, `gamma[i * m + j] = γ_ij`.
    pub fn new(m: usize, gamma: Vec<CouplingFunction>) -> Result<Self, CouplingError> {
        if m == 0 {
            return Err(CouplingError::Empty);
        }
        if gamma.len() != m * m {
            return Err(CouplingError::WrongSize {
                m,
                expected: m * m,
                got: gamma.len(),
            });
        }
        if let Some(i) = (0..m).find(|&i| !gamma[i * m + i].is_zero()) {
            return Err(CouplingError::NonZeroDiagonal(i));
        }
        Ok(Interconnection { m, gamma })
    }

    pub fn uncoupled(m: usize) -> Result<Self, CouplingError> {
        Self::new(m, vec![CouplingFunction::zero(); m * m])
    }

    /// Builds from a sparse list of nonzero entries, 0-based `(i, j, γ_ij)`.
    pub fn from_entries(
        m: usize,
        entries: impl IntoIterator<Item = (usize, usize, CouplingFunction)>,
    ) -> Result<Self, CouplingError> {
        if m == 0 {
            return Err(CouplingError::Empty);
        }
        let mut gamma = vec![CouplingFunction::zero(); m * m];
        for (i, j, g) in entries {
            if i >= m || j >= m {
                return Err(CouplingError::IndexOutOfRange { i, j, m });
            }
            gamma[i * m + j] = g;
        }
        Self::new(m, gamma)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &CouplingFunction {
        &self.gamma[i * self.m + j]
    }

    /// Nonzero entries as `(i, j, γ_ij)`, row-major.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, &CouplingFunction)> + '_ {
        self.gamma
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_zero())
            .map(move |(k, g)| (k / self.m, k % self.m, g))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    m: usize,
    edges: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(m: usize, edges: Vec<(usize, usize)>) -> Result<Self, CouplingError> {
        if m == 0 {
            return Err(CouplingError::Empty);
        }
        for &(i, j) in &edges {
            if i >= m || j >= m {
                return Err(CouplingError::IndexOutOfRange { i, j, m });
            }
            if i == j {
                return Err(CouplingError::NonZeroDiagonal(i));
            }
        }
        Ok(DirectedGraph { m, edges })
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Nodes reachable from every other node by a directed path.
    pub fn roots(&self) -> Vec<usize> {
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); self.m];
        for &(i, j) in &self.edges {
            incoming[j].push(i);
        }
        (0..self.m)
            .filter(|&root| {
                // walk edges backwards from the candidate root
                let mut seen = vec![false; self.m];
                seen[root] = true;
                let mut queue = VecDeque::from([root]);
                let mut count = 1;
                while let Some(v) = queue.pop_front() {
                    for &u in &incoming[v] {
                        if !seen[u] {
                            seen[u] = true;
                            count += 1;
                            queue.push_back(u);
                        }
                    }
                }
                count == self.m
            })
            .collect()
    }
}

/// `(i, j)` is an edge iff `γ_ij` is nonzero.
pub fn graph_of(ic: &Interconnection) -> DirectedGraph {
    DirectedGraph {
        m: ic.m,
        edges: ic.nonzero().map(|(i, j, _)| (i, j)).collect(),
    }
}

/// A graph is connected when it has a node reachable from every other node
/// (it contains a directed spanning tree).
pub fn is_connected(g: &DirectedGraph) -> bool {
    !g.roots().is_empty()
}

/// Symmetric sample grid used by the validation reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid(Vec<f64>);

impl SampleGrid {
    /// `n` points uniform on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Self {
        assert!(n >= 2 && half_width > 0.0);
        let step = 2.0 * half_width / (n - 1) as f64;
        let mut pts: Vec<f64> = (0..n).map(|k| -half_width + k as f64 * step).collect();
        // pin exact symmetry (and an exact zero for odd n)
        for k in 0..n / 2 {
            pts[n - 1 - k] = -pts[k];
        }
        if n % 2 == 1 {
            pts[n / 2] = 0.0;
        }
        SampleGrid(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid::symmetric(10.0, 201)
    }
}

/// Per-entry outcome of the coupling checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryReport {
    pub i: usize,
    pub j: usize,
    /// `γ(0) = 0` and `s·γ(s) ≥ 0` on the grid.
    pub sign_ok: bool,
    /// Nonzero entries do not vanish at any sampled `s ≠ 0`.
    pub nonvanishing_ok: bool,
    /// All difference quotients on the grid are finite.
    pub lipschitz_ok: bool,
    pub max_slope: f64,
    /// `|γ|` nondecreasing in `|s|` on the grid. Informational only.
    pub monotone: bool,
    /// Grid points where the sign condition fails.
    pub sign_failures: Vec<f64>,
}

impl EntryReport {
    pub fn passed(&self) -> bool {
        self.sign_ok && self.nonvanishing_ok && self.lipschitz_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<EntryReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(EntryReport::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &EntryReport> {
        self.entries.iter().filter(|e| !e.passed())
    }
}

fn check_entry(i: usize, j: usize, g: &CouplingFunction, grid: &[f64]) -> EntryReport {
    let vals: Vec<f64> = grid.iter().map(|&s| g.eval(s)).collect();
    let sign_failures: Vec<f64> = grid
        .iter()
        .zip(&vals)
        .filter(|(&s, &y)| !(s * y >= 0.0) || (s == 0.0 && y != 0.0))
        .map(|(&s, _)| s)
        .collect();
    let sign_ok = g.eval(0.0) == 0.0 && sign_failures.is_empty();
    let nonvanishing_ok =
        g.is_zero() || grid.iter().zip(&vals).all(|(&s, &y)| s == 0.0 || y != 0.0);
    let mut max_slope: f64 = 0.0;
    for (w, y) in grid.windows(2).zip(vals.windows(2)) {
        let q = ((y[1] - y[0]) / (w[1] - w[0])).abs();
        max_slope = if q.is_finite() { max_slope.max(q) } else { f64::INFINITY };
    }
    let lipschitz_ok = max_slope.is_finite();
    let mut by_mag: Vec<(f64, f64)> = grid
        .iter()
        .zip(&vals)
        .map(|(&s, &y)| (s.abs(), y.abs()))
        .collect();
    by_mag.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = by_mag
        .windows(2)
        .all(|w| w[1].0 == w[0].0 || w[1].1 >= w[0].1);
    EntryReport {
        i,
        j,
        sign_ok,
        nonvanishing_ok,
        lipschitz_ok,
        max_slope,
        monotone,
        sign_failures,
    }
}

/// Checks the sign, nonvanishing and Lipschitz conditions of every
/// off-diagonal entry on a sample grid.
pub fn validate_interconnection(ic: &Interconnection, grid: &SampleGrid) -> ValidationReport {
    let mut entries = Vec::with_capacity(ic.m * ic.m.saturating_sub(1));
    for i in 0..ic.m {
        for j in 0..ic.m {
            if i != j {
                entries.push(check_entry(i, j, ic.get(i, j), grid.points()));
            }
        }
    }
    ValidationReport { entries }
}

/// Validates a single coupling function on a grid.
pub fn validate_coupling(g: &CouplingFunction, grid: &SampleGrid) -> EntryReport {
    check_entry(0, 0, g, grid.points())
}
