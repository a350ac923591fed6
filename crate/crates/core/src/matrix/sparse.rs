use super::{check_block, check_len, FeatureMatrix};
use crate::error::{Error, Result};

/// Compressed sparse column storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if col_ptr.len() != cols + 1 || col_ptr[0] != 0 || col_ptr[cols] != values.len() {
            return Err(Error::DimensionMismatch("malformed column pointer array".into()));
        }
        if row_idx.len() != values.len() {
            return Err(Error::DimensionMismatch("row index and value arrays differ in length".into()));
        }
        if col_ptr.windows(2).any(|w| w[0] > w[1]) || row_idx.iter().any(|&i| i >= rows) {
            return Err(Error::InvalidInput("column pointers must be sorted and rows in range".into()));
        }
        Ok(Self { rows, cols, col_ptr, row_idx, values })
    }

    /// Drops exact zeros from a column-major dense buffer.
    pub fn from_dense_col_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_len("dense buffer", data.len(), rows * cols)?;
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..cols {
            for i in 0..rows {
                let v = data[i + j * rows];
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(values.len());
        }
        Self::new(rows, cols, col_ptr, row_idx, values)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        self.row_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }
}

impl FeatureMatrix for SparseMatrix {
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
            *o = self.col(start + k).map(|(i, x)| x * w[i] * r[i]).sum();
        }
        Ok(())
    }

    fn btmul(&self, start: usize, size: usize, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_block(self.cols, start, size)?;
        check_len("coefficients", u.len(), size)?;
        check_len("output", out.len(), self.rows)?;
        for (k, &uk) in u.iter().enumerate() {
            if uk != 0.0 {
                for (i, x) in self.col(start + k) {
                    out[i] += x * uk;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;

    #[test]
    fn agrees_with_reference() {
        let mut d = random_dense(12, 6, 8).as_col_major().to_vec();
        for (k, v) in d.iter_mut().enumerate() {
            if k % 3 != 0 {
                *v = 0.0;
            }
        }
        let s = SparseMatrix::from_dense_col_major(12, 6, &d).unwrap();
        assert_eq!(s.nnz(), 24);
        check_against_dense(&s, 5);
    }

    #[test]
    fn rejects_malformed() {
        assert!(SparseMatrix::new(2, 1, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
    }
}
