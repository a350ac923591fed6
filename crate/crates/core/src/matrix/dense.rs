use super::{check_block, check_len, symmetrize, FeatureMatrix};
use crate::error::{Error, Result};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::DimensionMismatch(format!("{} values do not fill a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::DimensionMismatch(format!("{} values do not fill a {rows}x{cols} matrix", data.len())));
        }
        let mut out = vec![0.0; data.len()];
        for i in 0..rows {
            for j in 0..cols {
                out[i + j * rows] = data[i * cols + j];
            }
        }
        Ok(Self { rows, cols, data: out })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("rows have unequal lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(n, p, &flat)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Columns `start..start+size` as a new matrix.
    pub fn columns(&self, start: usize, size: usize) -> Result<Self> {
        check_block(self.cols, start, size)?;
        let data = self.data[start * self.rows..(start + size) * self.rows].to_vec();
        Ok(Self { rows: self.rows, cols: size, data })
    }
}

impl FeatureMatrix for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn bmul(&self, start: usize, size: usize, w: &[f64], r: &[f64], out: &mut [f64]) -> Result<()> {
        check_block(self.cols, start, size)?;
        check_len("weights", w.len(), self.rows)?;
        check_len("residual", r.len(), self.rows)?;
        check_len("output", out.len(), size)?;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.column(start + k).iter().zip(w.iter().zip(r)).map(|(x, (wi, ri))| x * wi * ri).sum();
        }
        Ok(())
    }

    fn btmul(&self, start: usize, size: usize, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_block(self.cols, start, size)?;
        check_len("coefficients", u.len(), size)?;
        check_len("output", out.len(), self.rows)?;
        for (k, &uk) in u.iter().enumerate() {
            if uk == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(self.column(start + k)) {
                *o += x * uk;
            }
        }
        Ok(())
    }

    fn gram_block(&self, start: usize, size: usize, w: &[f64]) -> Result<Vec<f64>> {
        check_block(self.cols, start, size)?;
        check_len("weights", w.len(), self.rows)?;
        let mut gram = vec![0.0; size * size];
        let mut wx = vec![0.0; self.rows];
        for a in 0..size {
            for ((t, x), wi) in wx.iter_mut().zip(self.column(start + a)).zip(w) {
                *t = x * wi;
            }
            for b in a..size {
                let s: f64 = wx.iter().zip(self.column(start + b)).map(|(p, q)| p * q).sum();
                gram[a + b * size] = s;
                gram[b + a * size] = s;
            }
        }
        symmetrize(&mut gram, size);
        Ok(gram)
    }

    fn to_dense(&self) -> DenseMatrix {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;

    fn x22() -> DenseMatrix {
        DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn bmul_by_hand() {
        let mut out = [0.0; 2];
        x22().bmul(0, 2, &[0.5, 0.5], &[1.0, 1.0], &mut out).unwrap();
        assert_eq!(out, [2.0, 3.0]);
        x22().bmul(0, 2, &[0.5, 0.5], &[0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn btmul_by_hand() {
        let mut out = [0.0; 2];
        x22().btmul(0, 2, &[1.0, 1.0], &mut out).unwrap();
        assert_eq!(out, [3.0, 7.0]);
        x22().btmul(0, 2, &[0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, [3.0, 7.0]);
    }

    #[test]
    fn gram_by_hand() {
        let g = x22().gram_block(0, 2, &[0.5, 0.5]).unwrap();
        assert_eq!(g, vec![5.0, 7.0, 7.0, 10.0]);
        let z = DenseMatrix::zeros(3, 1);
        assert_eq!(z.gram_block(0, 1, &[1.0; 3]).unwrap(), vec![0.0]);
    }

    #[test]
    fn mul_identity_and_zero() {
        let id = DenseMatrix::from_row_major(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut out = [9.0; 2];
        id.mul(&[0.3, -2.0], &mut out).unwrap();
        assert_eq!(out, [0.3, -2.0]);
        id.mul(&[0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn dimension_errors() {
        let x = x22();
        let mut out = [0.0; 2];
        assert!(x.bmul(1, 2, &[1.0; 2], &[1.0; 2], &mut out).is_err());
        assert!(x.bmul(0, 2, &[1.0; 3], &[1.0; 2], &mut out).is_err());
        assert!(x.btmul(0, 2, &[1.0; 2], &mut [0.0; 3]).is_err());
        assert!(x.gram_block(2, 1, &[1.0; 2]).is_err());
        assert!(x.mul(&[1.0; 3], &mut out).is_err());
        assert!(DenseMatrix::from_row_major(2, 3, &[1.0; 5]).is_err());
    }

    #[test]
    fn agrees_with_reference() {
        check_against_dense(&random_dense(13, 7, 5), 11);
    }
}
