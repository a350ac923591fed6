use std::sync::Arc;

use super::{check_block, check_len, FeatureMatrix};
use crate::error::{Error, Result};

/// `X ⊗ I_c`: shape `nc × pc`, row `i·c + l`, column `j·c + l` holds `X[i, j]`.
///
/// Paired with the class-fastest coefficient layout `vec(Bᵀ)`, multiplying
/// by this matrix yields `vec((XB)ᵀ)`.
#[derive(Clone)]
pub struct KroneckerIdentity {
    base: Arc<dyn FeatureMatrix>,
    classes: usize,
}

impl KroneckerIdentity {
    pub fn new(base: Arc<dyn FeatureMatrix>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidInput("Kronecker factor needs at least one class".into()));
        }
        Ok(Self { base, classes })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn base(&self) -> &Arc<dyn FeatureMatrix> {
        &self.base
    }

    /// For class `l`: first base column and count of block columns `J ≡ l (mod c)`.
    fn class_range(&self, start: usize, size: usize, l: usize) -> (usize, usize, usize) {
        let c = self.classes;
        let end = start + size;
        let first = start + (l + c - start % c) % c;
        if first >= end {
            return (first, first / c, 0);
        }
        (first, first / c, (end - 1 - first) / c + 1)
    }

    fn gather(&self, v: &[f64], l: usize) -> Vec<f64> {
        v.iter().skip(l).step_by(self.classes).copied().collect()
    }
}

impl FeatureMatrix for KroneckerIdentity {
    fn rows(&self) -> usize {
        self.base.rows() * self.classes
    }

    fn cols(&self) -> usize {
        self.base.cols() * self.classes
    }

    fn bmul(&self, start: usize, size: usize, w: &[f64], r: &[f64], out: &mut [f64]) -> Result<()> {
        check_block(self.cols(), start, size)?;
        check_len("weights", w.len(), self.rows())?;
        check_len("residual", r.len(), self.rows())?;
        check_len("output", out.len(), size)?;
        let c = self.classes;
        for l in 0..c {
            let (first, j0, count) = self.class_range(start, size, l);
            if count == 0 {
                continue;
            }
            let wl = self.gather(w, l);
            let rl = self.gather(r, l);
            let mut tmp = vec![0.0; count];
            self.base.bmul(j0, count, &wl, &rl, &mut tmp)?;
            for (k, t) in tmp.into_iter().enumerate() {
                out[first + k * c - start] = t;
            }
        }
        Ok(())
    }

    fn btmul(&self, start: usize, size: usize, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_block(self.cols(), start, size)?;
        check_len("coefficients", u.len(), size)?;
        check_len("output", out.len(), self.rows())?;
        let c = self.classes;
        let n = self.base.rows();
        for l in 0..c {
            let (first, j0, count) = self.class_range(start, size, l);
            if count == 0 {
                continue;
            }
            let ul: Vec<f64> = (0..count).map(|k| u[first + k * c - start]).collect();
            if ul.iter().all(|&x| x == 0.0) {
                continue;
            }
            let mut tmp = vec![0.0; n];
            self.base.btmul(j0, count, &ul, &mut tmp)?;
            for (i, t) in tmp.into_iter().enumerate() {
                out[i * c + l] += t;
            }
        }
        Ok(())
    }

    fn gram_block(&self, start: usize, size: usize, w: &[f64]) -> Result<Vec<f64>> {
        check_block(self.cols(), start, size)?;
        check_len("weights", w.len(), self.rows())?;
        let c = self.classes;
        let mut gram = vec![0.0; size * size];
        for l in 0..c {
            let (first, j0, count) = self.class_range(start, size, l);
            if count == 0 {
                continue;
            }
            let wl = self.gather(w, l);
            let g = self.base.gram_block(j0, count, &wl)?;
            for a in 0..count {
                for b in 0..count {
                    let (ia, ib) = (first + a * c - start, first + b * c - start);
                    gram[ia + ib * size] = g[a + b * count];
                }
            }
        }
        Ok(gram)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::DenseMatrix;
    use super::*;

    /// Explicit `X ⊗ I_c` materialization.
    fn dense_kron(x: &DenseMatrix, c: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(x.nrows() * c, x.ncols() * c);
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                for l in 0..c {
                    out.set(i * c + l, j * c + l, x.get(i, j));
                }
            }
        }
        out
    }

    #[test]
    fn materializes_to_kronecker_product() {
        for c in [1, 2, 3] {
            let x = random_dense(5, 4, c as u64);
            let k = KroneckerIdentity::new(Arc::new(x.clone()), c).unwrap();
            assert_eq!(k.to_dense(), dense_kron(&x, c));
            check_against_dense(&k, 40 + c as u64);
        }
    }

    #[test]
    fn gram_block_has_class_diagonal_pattern() {
        let x = random_dense(6, 1, 9);
        let c = 3;
        let k = KroneckerIdentity::new(Arc::new(x.clone()), c).unwrap();
        let w = random_vec(6 * c, 3, true);
        let g = k.gram_block(0, c, &w).unwrap();
        let reference = ref_gram(&dense_kron(&x, c), 0, c, &w);
        assert!(close(&g, &reference, 1e-12));
        for a in 0..c {
            for b in 0..c {
                if a != b {
                    assert_eq!(g[a + b * c], 0.0);
                }
            }
        }
    }

    #[test]
    fn mul_reproduces_vec_of_xb_transpose() {
        let (n, p, c) = (7, 4, 3);
        let x = random_dense(n, p, 2);
        let b = random_dense(p, c, 3);
        let k = KroneckerIdentity::new(Arc::new(x.clone()), c).unwrap();
        // vec(Bᵀ): class fastest
        let flat: Vec<f64> = (0..p).flat_map(|j| (0..c).map(move |l| (j, l))).map(|(j, l)| b.get(j, l)).collect();
        let mut eta = vec![0.0; n * c];
        k.mul(&flat, &mut eta).unwrap();
        for i in 0..n {
            for l in 0..c {
                let xb: f64 = (0..p).map(|j| x.get(i, j) * b.get(j, l)).sum();
                assert!((eta[i * c + l] - xb).abs() <= 1e-12 * (1.0 + xb.abs()));
            }
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn products_match_materialized(n in 1usize..7, p in 1usize..6, c in 1usize..4, seed in 0u64..1000) {
            let x = random_dense(n, p, seed);
            let k = KroneckerIdentity::new(Arc::new(x.clone()), c).unwrap();
            let d = dense_kron(&x, c);
            let b = random_vec(p * c, seed + 1, false);
            let r = random_vec(n * c, seed + 2, false);
            let (mut got, mut want) = (vec![0.0; n * c], vec![0.0; n * c]);
            k.mul(&b, &mut got).unwrap();
            d.mul(&b, &mut want).unwrap();
            prop_assert!(close(&got, &want, 1e-12));
            let (mut got, mut want) = (vec![0.0; p * c], vec![0.0; p * c]);
            let w = random_vec(n * c, seed + 3, true);
            k.bmul(0, p * c, &w, &r, &mut got).unwrap();
            d.bmul(0, p * c, &w, &r, &mut want).unwrap();
            prop_assert!(close(&got, &want, 1e-12));
        }
    }
}
