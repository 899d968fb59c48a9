//! Planar cones and wedges, set distances, and the Lyapunov value.
//!
//! Target sets, for amplitude `ρ`:
//! - `B`: every block inside the closed disk of radius `ρ`;
//! - `R`: all blocks equal and on the circle of radius `ρ`;
//! - `A`: all blocks equal.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {0} is at the origin; its direction is undefined")]
    ZeroPoint(usize),
    #[error("point set is empty")]
    Empty,
}

/// Slack on the strict inequality `span < π`.
pub const ANGLE_SLACK: f64 = 1e-12;

fn wrap(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Convex hull of two half-lines from the origin with angle below `π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    bisector: f64,
    half_aperture: f64,
}

impl Cone {
    pub fn new(bisector: f64, half_aperture: f64) -> Option<Self> {
        if !(0.0..PI / 2.0).contains(&half_aperture) || !bisector.is_finite() {
            return None;
        }
        Some(Cone {
            bisector: wrap(bisector),
            half_aperture,
        })
    }

    /// Bisector direction in `[0, 2π)`.
    pub fn bisector(&self) -> f64 {
        self.bisector
    }

    pub fn half_aperture(&self) -> f64 {
        self.half_aperture
    }

    /// `∠C`, the angle between the two bounding half-lines.
    pub fn angle(&self) -> f64 {
        2.0 * self.half_aperture
    }

    /// Angular distance from the bisector, in `[0, π]`.
    fn offset(&self, p: [f64; 2]) -> f64 {
        let d = wrap(p[1].atan2(p[0]) - self.bisector);
        d.min(TAU - d)
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        (p[0] == 0.0 && p[1] == 0.0) || self.offset(p) <= self.half_aperture + tol
    }

    fn unit(&self) -> [f64; 2] {
        let (s, c) = self.bisector.sin_cos();
        [c, s]
    }
}

/// Smallest cone containing all `points`, or `None` when their angular span
/// is at least `π` (equivalently, their convex hull contains the origin).
///
/// Angles are sorted and the largest circular gap is removed: the span is
/// `2π − gap`. On equal gaps the first in sorted order wins.
pub fn smallest_cone(points: &[[f64; 2]]) -> Result<Option<Cone>, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::Empty);
    }
    if let Some(k) = points.iter().position(|p| p[0] == 0.0 && p[1] == 0.0) {
        return Err(GeometryError::ZeroPoint(k));
    }
    let mut angles: Vec<f64> = points.iter().map(|p| wrap(p[1].atan2(p[0]))).collect();
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    let mut best_gap = angles[0] + TAU - angles[n - 1];
    let mut start = angles[0];
    for w in angles.windows(2) {
        let gap = w[1] - w[0];
        if gap > best_gap {
            best_gap = gap;
            start = w[1];
        }
    }
    // a lone direction leaves a gap of 2π up to rounding
    let span = (TAU - best_gap).max(0.0);
    if span + ANGLE_SLACK >= PI {
        return Ok(None);
    }
    Ok(Cone::new(start + 0.5 * span, 0.5 * span))
}

/// All points nonzero and within an open semicircle of directions.
pub fn in_open_semicircle(points: &[[f64; 2]]) -> bool {
    matches!(smallest_cone(points), Ok(Some(_)))
}

/// `co(C ∩ {r1 ≤ |x| ≤ r2})` for a cone `C`.
///
/// The hull of an annular sector is the sector of the outer disk cut by the
/// chord through the two inner corners: `x ∈ C`, `|x| ≤ r2` and
/// `x·u ≥ r1 cos(α)` with `u` the bisector and `α` the half-aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wedge {
    pub cone: Cone,
    pub r1: f64,
    pub r2: f64,
}

impl Wedge {
    /// Largest violation of the three defining constraints, in distance
    /// units; zero inside.
    pub fn violation(&self, p: [f64; 2]) -> f64 {
        let r = p[0].hypot(p[1]);
        let u = self.cone.unit();
        let chord = self.r1 * self.cone.half_aperture.cos() - (p[0] * u[0] + p[1] * u[1]);
        let outer = r - self.r2;
        let angular = if r == 0.0 {
            0.0
        } else {
            let excess = self.cone.offset(p) - self.cone.half_aperture;
            if excess <= 0.0 {
                0.0
            } else {
                r * excess.min(PI / 2.0).sin()
            }
        };
        chord.max(outer).max(angular).max(0.0)
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        self.violation(p) <= tol
    }
}

/// Smallest `ρ`-wedge containing `points`: the smallest cone with radii
/// `r1 = min(min|p|, ρ)` and `r2 = max(max|p|, ρ)`.
pub fn wedge_of(points: &[[f64; 2]], rho: f64) -> Option<Wedge> {
    let cone = smallest_cone(points).ok().flatten()?;
    let radii = points.iter().map(|p| p[0].hypot(p[1]));
    let r1 = radii.clone().fold(f64::INFINITY, f64::min).min(rho);
    let r2 = radii.fold(0.0, f64::max).max(rho);
    Some(Wedge { cone, r1, r2 })
}

fn blocks(x: &[f64]) -> impl Iterator<Item = [f64; 2]> + '_ {
    x.chunks_exact(2).map(|c| [c[0], c[1]])
}

/// Distance to `B`, projecting each block onto the disk of radius `ρ`.
pub fn dist_to_b(eta: &[f64], rho: f64) -> f64 {
    blocks(eta)
        .map(|b| {
            let excess = (b[0].hypot(b[1]) - rho).max(0.0);
            excess * excess
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance to `R` with the minimizing unit direction, which is `None` when
/// the blocks sum to zero (every direction attains the minimum).
pub fn dist_to_r_with_direction(eta: &[f64], rho: f64) -> (f64, Option<[f64; 2]>) {
    let m = (eta.len() / 2) as f64;
    let (mut sx, mut sy, mut sq) = (0.0, 0.0, 0.0);
    for b in blocks(eta) {
        sx += b[0];
        sy += b[1];
        sq += b[0] * b[0] + b[1] * b[1];
    }
    let s = sx.hypot(sy);
    if s == 0.0 {
        return ((sq + m * rho * rho).sqrt(), None);
    }
    // sum the residuals directly; the expanded form loses accuracy near R
    let u = [sx / s, sy / s];
    let target = [rho * u[0], rho * u[1]];
    let d2: f64 = blocks(eta)
        .map(|b| (b[0] - target[0]).powi(2) + (b[1] - target[1]).powi(2))
        .sum();
    (d2.sqrt(), Some(u))
}

pub fn dist_to_r(eta: &[f64], rho: f64) -> f64 {
    dist_to_r_with_direction(eta, rho).0
}

/// Distance to `A`: deviation from the blockwise mean.
pub fn dist_to_a(x: &[f64]) -> f64 {
    let m = (x.len() / 2) as f64;
    if m == 0.0 {
        return 0.0;
    }
    let (mut mx, mut my) = (0.0, 0.0);
    for b in blocks(x) {
        mx += b[0];
        my += b[1];
    }
    mx /= m;
    my /= m;
    blocks(x)
        .map(|b| (b[0] - mx).powi(2) + (b[1] - my).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `V(η) = ½ max{0, max_i (|η_i|² − ρ²)}`.
pub fn lyapunov_v(eta: &[f64], rho: f64) -> f64 {
    let worst = blocks(eta)
        .map(|b| b[0] * b[0] + b[1] * b[1] - rho * rho)
        .fold(f64::NEG_INFINITY, f64::max);
    0.5 * worst.max(0.0)
}

/// Angle of the smallest cone containing the blocks, if one exists.
pub fn cone_angle(x: &[f64]) -> Option<f64> {
    let pts: Vec<[f64; 2]> = blocks(x).collect();
    smallest_cone(&pts).ok().flatten().map(|c| c.angle())
}
