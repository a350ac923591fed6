use std::sync::Arc;

use super::{check_block, check_len, FeatureMatrix};
use crate::error::{Error, Result};

/// Column-wise concatenation `[X₁ X₂ …]`; each query is routed to the parts
/// whose column ranges it overlaps.
#[derive(Clone)]
pub struct Concatenated {
    parts: Vec<Arc<dyn FeatureMatrix>>,
    /// `offsets[k]` is the first global column of part `k`; last entry is the total.
    offsets: Vec<usize>,
    rows: usize,
}

impl Concatenated {
    pub fn new(parts: Vec<Arc<dyn FeatureMatrix>>) -> Result<Self> {
        let rows = parts
            .first()
            .map(|m| m.rows())
            .ok_or_else(|| Error::InvalidInput("concatenation needs at least one part".into()))?;
        if let Some(bad) = parts.iter().find(|m| m.rows() != rows) {
            return Err(Error::DimensionMismatch(format!("part has {} rows, expected {rows}", bad.rows())));
        }
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        let mut acc = 0;
        for m in &parts {
            offsets.push(acc);
            acc += m.cols();
        }
        offsets.push(acc);
        Ok(Self { parts, offsets, rows })
    }

    pub fn parts(&self) -> &[Arc<dyn FeatureMatrix>] {
        &self.parts
    }

    /// `(part, local_start, local_size, offset_into_block)` for each overlapped part.
    fn pieces(&self, start: usize, size: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let end = start + size;
        (0..self.parts.len()).filter_map(move |k| {
            let (lo, hi) = (self.offsets[k], self.offsets[k + 1]);
            let s = start.max(lo);
            let e = end.min(hi);
            (s < e).then(|| (k, s - lo, e - s, s - start))
        })
    }

    fn single_part(&self, start: usize, size: usize) -> Option<(usize, usize)> {
        let mut it = self.pieces(start, size);
        match (it.next(), it.next()) {
            (Some((k, ls, _, _)), None) => Some((k, ls)),
            _ => None,
        }
    }
}

impl FeatureMatrix for Concatenated {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    fn bmul(&self, start: usize, size: usize, w: &[f64], r: &[f64], out: &mut [f64]) -> Result<()> {
        check_block(self.cols(), start, size)?;
        check_len("output", out.len(), size)?;
        for (k, ls, lsize, off) in self.pieces(start, size) {
            self.parts[k].bmul(ls, lsize, w, r, &mut out[off..off + lsize])?;
        }
        Ok(())
    }

    fn btmul(&self, start: usize, size: usize, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_block(self.cols(), start, size)?;
        check_len("coefficients", u.len(), size)?;
        for (k, ls, lsize, off) in self.pieces(start, size) {
            self.parts[k].btmul(ls, lsize, &u[off..off + lsize], out)?;
        }
        Ok(())
    }

    fn gram_block(&self, start: usize, size: usize, w: &[f64]) -> Result<Vec<f64>> {
        check_block(self.cols(), start, size)?;
        if let Some((k, ls)) = self.single_part(start, size) {
            return self.parts[k].gram_block(ls, size, w);
        }
        // Block straddles parts: fall back to column materialization.
        check_len("weights", w.len(), self.rows)?;
        let mut gram = vec![0.0; size * size];
        let mut col = vec![0.0; self.rows];
        let mut unit = vec![0.0; size];
        for c in 0..size {
            col.iter_mut().for_each(|x| *x = 0.0);
            unit[c] = 1.0;
            self.btmul(start, size, &unit, &mut col)?;
            unit[c] = 0.0;
            self.bmul(start, size, w, &col, &mut gram[c * size..(c + 1) * size])?;
        }
        super::symmetrize(&mut gram, size);
        Ok(gram)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::DenseMatrix;
    use super::*;

    fn split(x: &DenseMatrix, cuts: &[usize]) -> Concatenated {
        let mut parts: Vec<Arc<dyn FeatureMatrix>> = Vec::new();
        let mut prev = 0;
        for &c in cuts.iter().chain(std::iter::once(&x.ncols())) {
            parts.push(Arc::new(x.columns(prev, c - prev).unwrap()));
            prev = c;
        }
        Concatenated::new(parts).unwrap()
    }

    #[test]
    fn two_halves_agree_with_whole() {
        let x = random_dense(11, 8, 4);
        let c = split(&x, &[4]);
        assert_eq!(c.to_dense(), x);
        check_against_dense(&c, 21);
    }

    #[test]
    fn result_independent_of_split() {
        let x = random_dense(9, 10, 7);
        let w = random_vec(9, 1, true);
        let r = random_vec(9, 2, false);
        let mut results = Vec::new();
        for cuts in [&[][..], &[3], &[1, 5, 9], &[2, 3, 4, 7]] {
            let c = split(&x, cuts);
            let mut out = vec![0.0; 6];
            c.bmul(2, 6, &w, &r, &mut out).unwrap();
            results.push((out, c.gram_block(2, 6, &w).unwrap()));
        }
        for (b, g) in &results[1..] {
            assert!(close(b, &results[0].0, 1e-12));
            assert!(close(g, &results[0].1, 1e-12));
        }
    }

    #[test]
    fn rejects_mismatched_rows() {
        let a: Arc<dyn FeatureMatrix> = Arc::new(random_dense(3, 2, 1));
        let b: Arc<dyn FeatureMatrix> = Arc::new(random_dense(4, 2, 1));
        assert!(Concatenated::new(vec![a, b]).is_err());
        assert!(Concatenated::new(vec![]).is_err());
    }
}
