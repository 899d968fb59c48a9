//! Adaptive Simpson quadrature.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: estimate {estimate}, error estimate {error:.3e}")]
    NotConverged { estimate: f64, error: f64 },
    #[error("integrand produced a non-finite value")]
    NonFinite,
    #[error("invalid quadrature config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Nodes seeding the interval; `initial_nodes - 1` equal panels are refined independently.
    pub initial_nodes: usize,
    /// Tolerance relative to the estimated `L1` norm of the integrand.
    pub rel_tol: f64,
    /// Maximum bisection depth of a panel.
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            initial_nodes: 9,
            rel_tol: 1e-10,
            max_depth: 40,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tolerance(rel_tol: f64) -> Self {
        QuadratureConfig {
            rel_tol,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<(), QuadratureError> {
        if self.initial_nodes < 2 {
            return Err(QuadratureError::BadConfig("need at least two nodes"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(QuadratureError::BadConfig("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Panel {
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, fa: f64, fm: f64, b: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    cfg.check()?;
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite)
        }
    };

    let n = cfg.initial_nodes - 1;
    let h = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n)
        .map(|k| if k == n { b } else { a + k as f64 * h })
        .collect();
    let ys = xs.iter().map(|&x| eval(x)).collect::<Result<Vec<_>, _>>()?;
    let mut panels = Vec::with_capacity(n);
    let mut l1 = 0.0;
    for k in 0..n {
        let m = 0.5 * (xs[k] + xs[k + 1]);
        let fm = eval(m)?;
        l1 += simpson(xs[k], ys[k].abs(), fm.abs(), xs[k + 1], ys[k + 1].abs()).abs();
        panels.push(Panel {
            a: xs[k],
            fa: ys[k],
            m,
            fm,
            b: xs[k + 1],
            fb: ys[k + 1],
            whole: simpson(xs[k], ys[k], fm, xs[k + 1], ys[k + 1]),
            tol: 0.0,
            depth: 0,
        });
    }
    let panel_tol = cfg.rel_tol * l1.max(f64::MIN_POSITIVE) / n as f64;
    for p in &mut panels {
        p.tol = panel_tol;
    }

    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    while let Some(p) = panels.pop() {
        let lm = 0.5 * (p.a + p.m);
        let rm = 0.5 * (p.m + p.b);
        let flm = eval(lm)?;
        let frm = eval(rm)?;
        let left = simpson(p.a, p.fa, flm, p.m, p.fm);
        let right = simpson(p.m, p.fm, frm, p.b, p.fb);
        let diff = left + right - p.whole;
        let roundoff = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        let too_narrow = lm <= p.a || rm >= p.b;
        if diff.abs() <= 15.0 * p.tol || diff.abs() <= roundoff || too_narrow {
            value += left + right + diff / 15.0;
            error += diff.abs() / 15.0;
        } else if p.depth >= cfg.max_depth {
            converged = false;
            value += left + right + diff / 15.0;
            error += diff.abs() / 15.0;
        } else {
            let tol = 0.5 * p.tol;
            let depth = p.depth + 1;
            panels.push(Panel {
                a: p.a,
                fa: p.fa,
                m: lm,
                fm: flm,
                b: p.m,
                fb: p.fm,
                whole: left,
                tol,
                depth,
            });
            panels.push(Panel {
                a: p.m,
                fa: p.fm,
                m: rm,
                fm: frm,
                b: p.b,
                fb: p.fb,
                whole: right,
                tol,
                depth,
            });
        }
    }
    if converged {
        Ok(Estimate { value, error })
    } else {
        Err(QuadratureError::NotConverged {
            estimate: value,
            error,
        })
    }
}
