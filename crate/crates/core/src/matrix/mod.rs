//! Feature-matrix abstraction.
//!
//! The solvers only touch `X` through column-block products, so any structured
//! representation can be plugged in by implementing [`FeatureMatrix`]. Weights
//! are passed per call because the GLM layer changes them every outer step.

mod concat;
mod dense;
mod kron;
mod sparse;

pub use concat::Concatenated;
pub use dense::DenseMatrix;
pub use kron::KroneckerIdentity;
pub use sparse::SparseMatrix;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groups::Groups;

pub trait FeatureMatrix: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `out = X[:, start..start+size]ᵀ diag(w) r`
    fn bmul(&self, start: usize, size: usize, w: &[f64], r: &[f64], out: &mut [f64]) -> Result<()>;

    /// `out += X[:, start..start+size] u`
    fn btmul(&self, start: usize, size: usize, u: &[f64], out: &mut [f64]) -> Result<()>;

    /// `X_gᵀ diag(w) X_g`, column-major `size × size`.
    ///
    /// The default materializes one column at a time through `btmul`.
    fn gram_block(&self, start: usize, size: usize, w: &[f64]) -> Result<Vec<f64>> {
        check_block(self.cols(), start, size)?;
        check_len("weights", w.len(), self.rows())?;
        let n = self.rows();
        let mut gram = vec![0.0; size * size];
        let mut col = vec![0.0; n];
        let mut unit = vec![0.0; size];
        for k in 0..size {
            col.iter_mut().for_each(|c| *c = 0.0);
            unit[k] = 1.0;
            self.btmul(start, size, &unit, &mut col)?;
            unit[k] = 0.0;
            self.bmul(start, size, w, &col, &mut gram[k * size..(k + 1) * size])?;
        }
        symmetrize(&mut gram, size);
        Ok(gram)
    }

    /// `out = X beta`
    fn mul(&self, beta: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("beta", beta.len(), self.cols())?;
        check_len("output", out.len(), self.rows())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut j = 0;
        let p = beta.len();
        while j < p {
            if beta[j] == 0.0 {
                j += 1;
                continue;
            }
            let start = j;
            while j < p && beta[j] != 0.0 {
                j += 1;
            }
            self.btmul(start, j - start, &beta[start..j], out)?;
        }
        Ok(())
    }

    /// Dense copy, mostly for reference checks.
    fn to_dense(&self) -> DenseMatrix {
        let (n, p) = (self.rows(), self.cols());
        let mut data = vec![0.0; n * p];
        for j in 0..p {
            self.btmul(j, 1, &[1.0], &mut data[j * n..(j + 1) * n]).expect("column index in range");
        }
        DenseMatrix::from_col_major(n, p, data).expect("consistent shape")
    }
}

pub(crate) fn check_block(cols: usize, start: usize, size: usize) -> Result<()> {
    if start.checked_add(size).is_none_or(|end| end > cols) {
        return Err(Error::DimensionMismatch(format!(
            "column block [{start}, {}) exceeds {cols} columns",
            start.saturating_add(size)
        )));
    }
    Ok(())
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

pub(crate) fn symmetrize(a: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (a[i + j * d] + a[j + i * d]);
            a[i + j * d] = s;
            a[j + i * d] = s;
        }
    }
}

/// `‖X_gᵀ W r‖₂` for every group, fanned out over the rayon pool.
pub fn score_all_groups(m: &dyn FeatureMatrix, groups: &Groups, w: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    check_len("weights", w.len(), m.rows())?;
    check_len("residual", r.len(), m.rows())?;
    if groups.total() != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "groups cover {} columns, matrix has {}",
            groups.total(),
            m.cols()
        )));
    }
    (0..groups.len())
        .into_par_iter()
        .map(|g| {
            let mut buf = vec![0.0; groups.size(g)];
            m.bmul(groups.start(g), groups.size(g), w, r, &mut buf)?;
            Ok(buf.iter().map(|x| x * x).sum::<f64>().sqrt())
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_dense(n: usize, p: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        DenseMatrix::from_col_major(n, p, data).unwrap()
    }

    pub fn random_vec(n: usize, seed: u64, nonneg: bool) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| if nonneg { rng.random::<f64>() } else { rng.random::<f64>() * 2.0 - 1.0 }).collect()
    }

    /// Reference arithmetic on a materialized matrix.
    pub fn ref_bmul(x: &DenseMatrix, start: usize, size: usize, w: &[f64], r: &[f64]) -> Vec<f64> {
        (start..start + size).map(|j| (0..x.rows()).map(|i| x.get(i, j) * w[i] * r[i]).sum()).collect()
    }

    pub fn ref_btmul(x: &DenseMatrix, start: usize, u: &[f64]) -> Vec<f64> {
        (0..x.rows()).map(|i| u.iter().enumerate().map(|(k, uk)| x.get(i, start + k) * uk).sum()).collect()
    }

    pub fn ref_gram(x: &DenseMatrix, start: usize, size: usize, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; size * size];
        for a in 0..size {
            for b in 0..size {
                g[a + b * size] = (0..x.rows()).map(|i| x.get(i, start + a) * w[i] * x.get(i, start + b)).sum();
            }
        }
        g
    }

    pub fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
        let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * scale)
    }

    /// Checks every contract operation of `m` against its dense materialization.
    pub fn check_against_dense(m: &dyn FeatureMatrix, seed: u64) {
        let x = m.to_dense();
        let (n, p) = (m.rows(), m.cols());
        let w = random_vec(n, seed, true);
        let r = random_vec(n, seed + 1, false);
        let blocks = [(0, p), (0, 1), (p / 3, p - p / 3), (p.saturating_sub(2), 2.min(p))];
        for &(s, k) in &blocks {
            let mut out = vec![0.0; k];
            m.bmul(s, k, &w, &r, &mut out).unwrap();
            assert!(close(&out, &ref_bmul(&x, s, k, &w, &r), 1e-12), "bmul block {s}+{k}");

            let u = random_vec(k, seed + 2, false);
            let mut acc = vec![0.0; n];
            m.btmul(s, k, &u, &mut acc).unwrap();
            assert!(close(&acc, &ref_btmul(&x, s, &u), 1e-12), "btmul block {s}+{k}");

            let g = m.gram_block(s, k, &w).unwrap();
            assert!(close(&g, &ref_gram(&x, s, k, &w), 1e-12), "gram block {s}+{k}");
        }
        let mut beta = random_vec(p, seed + 3, false);
        for (j, b) in beta.iter_mut().enumerate() {
            if j % 3 == 1 {
                *b = 0.0;
            }
        }
        let mut out = vec![0.0; n];
        m.mul(&beta, &mut out).unwrap();
        assert!(close(&out, &ref_btmul(&x, 0, &beta), 1e-12));
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    #[test]
    fn score_all_groups_matches_blockwise_norms() {
        let x = random_dense(15, 9, 1);
        let groups = Groups::from_sizes(&[2, 3, 1, 3]).unwrap();
        let w = random_vec(15, 2, true);
        let r = random_vec(15, 3, false);
        let scores = score_all_groups(&x, &groups, &w, &r).unwrap();
        for g in 0..groups.len() {
            let b = ref_bmul(&x, groups.start(g), groups.size(g), &w, &r);
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((scores[g] - norm).abs() <= 1e-12 * (1.0 + norm));
        }
        let zero = score_all_groups(&x, &groups, &w, &[0.0; 15]).unwrap();
        assert!(zero.iter().all(|&s| s == 0.0));

        let whole = Groups::from_sizes(&[9]).unwrap();
        let s = score_all_groups(&x, &whole, &w, &r).unwrap();
        let full = ref_bmul(&x, 0, 9, &w, &r);
        assert!((s[0] - full.iter().map(|v| v * v).sum::<f64>().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn score_all_groups_rejects_bad_partition() {
        let x = random_dense(4, 3, 1);
        let groups = Groups::from_sizes(&[2]).unwrap();
        assert!(score_all_groups(&x, &groups, &[0.25; 4], &[1.0; 4]).is_err());
    }
}
