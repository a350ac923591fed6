//! Exact solver for the diagonal block update
//!
//! ```text
//! minimize_x  ½ xᵀ Σ x − vᵀx + λ‖x‖₂,   Σ = diag(sigma) ⪰ 0, λ > 0
//! ```
//!
//! If `‖v‖₂ ≤ λ` the minimizer is zero. Otherwise `x = (Σ + λ/h I)⁻¹ v` where
//! `h = ‖x‖₂` is the unique positive root of
//!
//! ```text
//! φ(h) = Σᵢ vᵢ² / (σᵢ h + λ)² − 1
//! ```
//!
//! `φ` is strictly decreasing and strictly convex, so Newton's method started
//! anywhere with `φ(h₀) ≥ 0` produces a nondecreasing sequence converging to
//! the root. The adaptive bisection picks such a start between the bounds
//! [`lower_bound`] and [`upper_bound`], skipping the steep region near zero
//! where plain Newton crawls.

use crate::error::{Error, Result};

/// Default tolerance on `|φ(h)|`.
pub const DEFAULT_EPS: f64 = 1e-12;
/// Iteration cap shared by the Newton and bisection loops.
pub const DEFAULT_MAX_ITER: usize = 100;
/// Relative threshold below which a diagonal entry counts as zero.
pub const SIGMA_TOL: f64 = 1e-10;

/// Bracket width under which bisection is skipped and Newton starts at the lower bound.
const SKIP_BISECTION_WIDTH: f64 = 0.1;
/// Floor on the prior weight given to the lower bound.
const MIN_PRIOR_WEIGHT: f64 = 0.05;

/// One block update `(Σ, v, λ)` with `Σ` diagonal.
///
/// Construction zeroes `v` wherever `σᵢ < SIGMA_TOL · max σ`, so the existence
/// condition `v_S = 0` on the null set of `Σ` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagQuadProblem {
    sigma: Vec<f64>,
    v: Vec<f64>,
    lam: f64,
}

impl DiagQuadProblem {
    pub fn new(sigma: Vec<f64>, mut v: Vec<f64>, lam: f64) -> Result<Self> {
        if sigma.is_empty() || sigma.len() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "sigma has length {}, v has length {}",
                sigma.len(),
                v.len()
            )));
        }
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lam}")));
        }
        if sigma.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput("sigma must be finite and nonnegative".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("v must be finite".into()));
        }
        let smax = sigma.iter().cloned().fold(0.0, f64::max);
        let cutoff = SIGMA_TOL * smax;
        for (s, vi) in sigma.iter().zip(v.iter_mut()) {
            if *s <= cutoff {
                *vi = 0.0;
            }
        }
        Ok(Self { sigma, v, lam })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn lam(&self) -> f64 {
        self.lam
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn v_norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Smallest strictly positive diagonal entry, if any.
    fn sigma_min_positive(&self) -> Option<f64> {
        self.sigma
            .iter()
            .zip(&self.v)
            .filter(|(s, _)| **s > 0.0)
            .map(|(s, _)| *s)
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.min(s))))
    }
}

/// Result of [`solve_bcd`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSolution {
    pub x: Vec<f64>,
    /// `‖x‖₂`
    pub h: f64,
    pub bisect_iters: usize,
    pub newton_iters: usize,
}

pub fn phi(p: &DiagQuadProblem, h: f64) -> f64 {
    let lam = p.lam;
    p.sigma
        .iter()
        .zip(&p.v)
        .map(|(s, v)| {
            let d = s * h + lam;
            v * v / (d * d)
        })
        .sum::<f64>()
        - 1.0
}

pub fn phi_prime(p: &DiagQuadProblem, h: f64) -> f64 {
    let lam = p.lam;
    -2.0 * p
        .sigma
        .iter()
        .zip(&p.v)
        .map(|(s, v)| {
            let d = s * h + lam;
            v * v * s / (d * d * d)
        })
        .sum::<f64>()
}

fn phi_and_prime(p: &DiagQuadProblem, h: f64) -> (f64, f64) {
    let lam = p.lam;
    let mut f = -1.0;
    let mut fp = 0.0;
    for (s, v) in p.sigma.iter().zip(&p.v) {
        let d = s * h + lam;
        let t = v * v / (d * d);
        f += t;
        fp -= 2.0 * t * s / d;
    }
    (f, fp)
}

/// Largest `h ≥ 0` with `Σᵢ (σᵢ h + λ)² ≤ ‖v‖₁²`; `φ` is nonnegative there.
///
/// Roots of `a h² + b h + c` with `a = Σσᵢ²`, `b = 2λΣσᵢ`, `c = λ²d − ‖v‖₁²`.
/// Only the case `c < 0` gives a positive root, evaluated in the
/// cancellation-free form `−2c / (b + √(b² − 4ac))`.
pub fn lower_bound(p: &DiagQuadProblem) -> f64 {
    let lam = p.lam;
    let d = p.dim() as f64;
    let a: f64 = p.sigma.iter().map(|s| s * s).sum();
    let b: f64 = 2.0 * lam * p.sigma.iter().sum::<f64>();
    let l1: f64 = p.v.iter().map(|x| x.abs()).sum();
    let c = lam * lam * d - l1 * l1;
    if c >= 0.0 || a <= 0.0 {
        return 0.0;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return 0.0;
    }
    (-2.0 * c / (b + disc.sqrt())).max(0.0)
}

/// `sqrt(Σ_{σᵢ>0} vᵢ²/σᵢ²)`; `φ` is nonpositive there.
pub fn upper_bound(p: &DiagQuadProblem) -> f64 {
    p.sigma.iter().zip(&p.v).filter(|(s, _)| **s > 0.0).map(|(s, v)| (v / s) * (v / s)).sum::<f64>().sqrt()
}

/// Newton's method on `φ` from `h0`. Requires `φ(h0) ≥ −eps`.
pub fn newton_root(p: &DiagQuadProblem, h0: f64, eps: f64, max_iter: usize) -> Result<(f64, usize)> {
    newton_root_traced(p, h0, eps, max_iter, |_| {})
}

/// [`newton_root`] reporting every iterate (including `h0`) to `trace`.
pub fn newton_root_traced(
    p: &DiagQuadProblem,
    h0: f64,
    eps: f64,
    max_iter: usize,
    mut trace: impl FnMut(f64),
) -> Result<(f64, usize)> {
    let mut h = h0;
    trace(h);
    let mut iters = 0;
    loop {
        let (f, fp) = phi_and_prime(p, h);
        if f.abs() <= eps {
            return Ok((h, iters));
        }
        if iters >= max_iter || fp >= 0.0 {
            return Err(Error::IterationLimit { what: "newton root-finder", limit: max_iter });
        }
        h = (h - f / fp).max(0.0);
        iters += 1;
        trace(h);
    }
}

/// Finds a Newton starting point with `φ(h) ≥ −eps` by repeatedly moving
/// from the upper bound towards the lower bound with weight
/// `w = max(λ / (σ_min h★ + λ), 0.05)`.
pub fn adaptive_bisection(p: &DiagQuadProblem, eps: f64, max_iter: usize) -> Result<(f64, usize)> {
    let lo = lower_bound(p);
    let mut hi = upper_bound(p);
    if hi - lo < SKIP_BISECTION_WIDTH {
        return Ok((lo, 0));
    }
    if phi(p, lo) <= eps {
        // lower bound already sits on the root (always the case for d = 1)
        return Ok((lo, 0));
    }
    let sigma_min = p.sigma_min_positive().unwrap_or(0.0);
    let lam = p.lam;
    let mut h = hi;
    let mut iters = 0;
    while phi(p, h) < -eps {
        if h - lo <= f64::EPSILON * (1.0 + lo) {
            return Ok((lo, iters));
        }
        if iters >= max_iter {
            return Err(Error::IterationLimit { what: "adaptive bisection", limit: max_iter });
        }
        hi = h;
        let w = (lam / (sigma_min * hi + lam)).max(MIN_PRIOR_WEIGHT);
        h = w * lo + (1.0 - w) * hi;
        iters += 1;
    }
    Ok((h, iters))
}

/// Newton-ABS: zero test, adaptive bisection start, Newton refinement.
pub fn solve_bcd(p: &DiagQuadProblem, eps: f64, max_iter: usize) -> Result<KernelSolution> {
    let d = p.dim();
    if p.v_norm() <= p.lam {
        return Ok(KernelSolution { x: vec![0.0; d], h: 0.0, bisect_iters: 0, newton_iters: 0 });
    }
    let (mut h, bisect_iters) = adaptive_bisection(p, eps, max_iter)?;
    let mut newton_iters = 0;
    if phi(p, h).abs() > eps {
        let (root, it) = newton_root(p, h, eps, max_iter)?;
        h = root;
        newton_iters = it;
    }
    Ok(KernelSolution { x: block_solution(p, h), h, bisect_iters, newton_iters })
}

/// `x = (Σ + λ/h I)⁻¹ v`, written as `v h / (σ h + λ)` so `h = 0` is safe.
pub fn block_solution(p: &DiagQuadProblem, h: f64) -> Vec<f64> {
    p.sigma.iter().zip(&p.v).map(|(s, v)| v * h / (s * h + p.lam)).collect()
}

/// Closed-form scalar update `sign(v)(|v| − λ)₊ / σ`.
pub fn soft_threshold(sigma: f64, v: f64, lam: f64) -> f64 {
    let a = v.abs() - lam;
    if a <= 0.0 || sigma <= 0.0 {
        0.0
    } else {
        v.signum() * a / sigma
    }
}
