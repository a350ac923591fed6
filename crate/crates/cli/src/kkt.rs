//! Optimality check recomputed from the data and a written coefficient path.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{ensure, Context};
use groupnet::family_by_name;
use serde::Serialize;

use crate::io::load_csv;
use crate::problem::{FamilyKind, Problem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktRow {
    pub lambda: f64,
    /// Largest `‖X_gᵀ∇ℓ‖ / (λαω_g)` over zero penalized groups.
    pub max_score_ratio: f64,
    /// Largest subgradient-equation residual over nonzero or unpenalized
    /// groups (and the intercepts), relative to λ.
    pub max_stationarity: f64,
    pub pass: bool,
}

/// Coefficient vectors and intercepts, one entry per λ.
type PathCoefs = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Coefficients and intercepts per λ from a long-format coefficient file.
pub fn read_path(path: &Path, lambdas: &[f64], ncoef: usize, classes: usize) -> anyhow::Result<PathCoefs> {
    let t = load_csv(path)?;
    ensure!(t.cols == 4, "{} should have columns lambda,group,column,value", path.display());
    let index: HashMap<u64, usize> = lambdas.iter().enumerate().map(|(k, l)| (l.to_bits(), k)).collect();
    let mut betas = vec![vec![0.0; ncoef]; lambdas.len()];
    let mut b0 = vec![vec![0.0; classes]; lambdas.len()];
    for r in t.data.chunks(4) {
        let k = *index.get(&r[0].to_bits()).with_context(|| format!("lambda {} not in the summary", r[0]))?;
        let col = r[2] as usize;
        if r[1] < 0.0 {
            ensure!(col < classes, "intercept class {col} out of range");
            b0[k][col] = r[3];
        } else {
            ensure!(col < ncoef, "coefficient column {col} out of range");
            betas[k][col] = r[3];
        }
    }
    Ok((betas, b0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Checks one path point given on the fitting scale.
pub fn check_point(
    pb: &Problem,
    lam: f64,
    beta: &[f64],
    b0: &[f64],
    slack: f64,
    stat_tol: Option<f64>,
) -> anyhow::Result<KktRow> {
    let m = pb.design_matrix()?;
    let c = pb.classes;
    let n = pb.n() * c;
    let name = if pb.kind == FamilyKind::Gaussian && c == 1 { "gaussian" } else { pb.kind.name() };
    let family = family_by_name(name, pb.y.clone(), pb.weights.clone(), c)?;
    let mut eta = vec![0.0; n];
    m.mul(beta, &mut eta)?;
    for (i, e) in eta.iter_mut().enumerate() {
        *e += b0[i % c] + pb.offset.as_ref().map_or(0.0, |o| o[i]);
    }
    let mut grad = vec![0.0; n];
    family.gradient(&eta, &mut grad);

    let ones = vec![1.0; n];
    let mut ratio: f64 = 0.0;
    let mut stat: f64 = 0.0;
    if pb.intercept {
        for l in 0..c {
            let s: f64 = grad.iter().skip(l).step_by(c).sum();
            stat = stat.max(s.abs() / lam);
        }
    }
    for g in 0..pb.groups.len() {
        let r = pb.groups.range(g);
        let mut s = vec![0.0; r.len()];
        m.bmul(r.start, r.len(), &ones, &grad, &mut s)?;
        let b = &beta[r];
        let (a, w) = (pb.alpha, pb.omega[g]);
        let nb = norm(b);
        if nb == 0.0 && a * w > 0.0 {
            ratio = ratio.max(norm(&s) / (lam * a * w));
            continue;
        }
        let resid: Vec<f64> = s
            .iter()
            .zip(b)
            .map(|(si, bi)| si + lam * w * ((1.0 - a) * bi + if nb > 0.0 { a * bi / nb } else { 0.0 }))
            .collect();
        stat = stat.max(norm(&resid) / lam);
    }
    Ok(KktRow {
        lambda: lam,
        max_score_ratio: ratio,
        max_stationarity: stat,
        pass: ratio <= 1.0 + slack && stat_tol.is_none_or(|t| stat <= t),
    })
}

pub fn check_path(
    pb: &Problem,
    lambdas: &[f64],
    betas: &[Vec<f64>],
    intercepts: &[Vec<f64>],
    slack: f64,
    stat_tol: Option<f64>,
) -> anyhow::Result<Vec<KktRow>> {
    lambdas
        .iter()
        .zip(betas.iter().zip(intercepts))
        .map(|(lam, (b, b0))| {
            let (b, b0) = pb.to_fit_scale(b, b0);
            check_point(pb, *lam, &b, &b0, slack, stat_tol)
        })
        .collect()
}
