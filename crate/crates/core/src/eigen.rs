//! Cyclic Jacobi eigendecomposition for small symmetric PSD blocks.

use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 30;
/// Off-diagonal Frobenius norm target, relative to `‖A‖_F`.
pub const OFF_DIAG_TOL: f64 = 1e-13;

/// `A = Q diag(values) Qᵀ` with eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub dim: usize,
    pub values: Vec<f64>,
    /// Column-major `dim × dim`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    /// `Qᵀ x`
    pub fn rotate_in(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(self.vector(k), x);
        }
    }

    /// `Q x`
    pub fn rotate_out(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                for (o, q) in out.iter_mut().zip(self.vector(k)) {
                    *o += q * xk;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigendecomposition of the symmetric `dim × dim` matrix `a` (column-major).
/// Negative eigenvalues from rounding are clamped to zero.
pub fn gram_eigen(a: &[f64], dim: usize) -> Result<SymEigen> {
    let mut e = symmetric_eigen(a, dim)?;
    e.values.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(e)
}

/// Eigendecomposition of a symmetric matrix without the nonnegativity clamp.
pub fn symmetric_eigen(a: &[f64], dim: usize) -> Result<SymEigen> {
    if a.len() != dim * dim {
        return Err(Error::DimensionMismatch(format!("expected {dim}x{dim} matrix, got {} entries", a.len())));
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..dim {
        for j in 0..i {
            if (a[i + j * dim] - a[j + i * dim]).abs() > 1e-10 * (1.0 + frob) {
                return Err(Error::InvalidInput("matrix is not symmetric".into()));
            }
        }
    }

    let mut m = a.to_vec();
    // symmetrize exactly
    for i in 0..dim {
        for j in 0..i {
            let s = 0.5 * (m[i + j * dim] + m[j + i * dim]);
            m[i + j * dim] = s;
            m[j + i * dim] = s;
        }
    }
    let mut q = vec![0.0; dim * dim];
    for i in 0..dim {
        q[i + i * dim] = 1.0;
    }

    let target = OFF_DIAG_TOL * frob;
    let mut converged = frob == 0.0;
    let mut sweep = 0;
    while !converged {
        if off_diag_norm(&m, dim) <= target {
            converged = true;
            break;
        }
        if sweep >= MAX_SWEEPS {
            return Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS });
        }
        sweep += 1;
        for p in 0..dim {
            for r in (p + 1)..dim {
                let apq = m[p + r * dim];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p + p * dim];
                let aqq = m[r + r * dim];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, dim, p, r, c, s);
                for k in 0..dim {
                    let qkp = q[k + p * dim];
                    let qkr = q[k + r * dim];
                    q[k + p * dim] = c * qkp - s * qkr;
                    q[k + r * dim] = s * qkp + c * qkr;
                }
            }
        }
    }
    debug_assert!(converged);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| m[j + j * dim].partial_cmp(&m[i + i * dim]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[i + i * dim]).collect();
    let mut vectors = Vec::with_capacity(dim * dim);
    for &i in &order {
        vectors.extend_from_slice(&q[i * dim..(i + 1) * dim]);
    }
    Ok(SymEigen { dim, values, vectors })
}

/// `m ← Jᵀ m J` for the Givens rotation acting on coordinates `(p, r)`.
fn rotate(m: &mut [f64], dim: usize, p: usize, r: usize, c: f64, s: f64) {
    for k in 0..dim {
        let mkp = m[k + p * dim];
        let mkr = m[k + r * dim];
        m[k + p * dim] = c * mkp - s * mkr;
        m[k + r * dim] = s * mkp + c * mkr;
    }
    for k in 0..dim {
        let mpk = m[p + k * dim];
        let mrk = m[r + k * dim];
        m[p + k * dim] = c * mpk - s * mrk;
        m[r + k * dim] = s * mpk + c * mrk;
    }
    m[r + p * dim] = 0.0;
    m[p + r * dim] = 0.0;
}

fn off_diag_norm(m: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..dim {
        for i in 0..dim {
            if i != j {
                s += m[i + j * dim] * m[i + j * dim];
            }
        }
    }
    s.sqrt()
}
