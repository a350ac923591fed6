//! Weighted centering and scaling of the feature columns.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Columns whose weighted standard deviation falls below this (relative to
/// their magnitude) are treated as constant and left unscaled.
const CONSTANT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    /// Columns flagged as constant; these keep scale 1.
    pub constant: Vec<bool>,
    pub y_center: f64,
    pub y_scale: f64,
}

/// Centers and scales each column of `x` to weighted mean 0 and weighted
/// variance 1. With `y` given, the response is transformed the same way.
pub fn standardize(
    x: &DenseMatrix,
    y: Option<&[f64]>,
    w: &[f64],
) -> Result<(DenseMatrix, Option<Vec<f64>>, Standardization)> {
    let n = x.nrows();
    if w.len() != n || y.is_some_and(|y| y.len() != n) {
        return Err(Error::DimensionMismatch("weights and response must match the row count".into()));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let moments = |col: &[f64]| {
        let m: f64 = col.iter().zip(&w).map(|(a, b)| a * b).sum();
        let v: f64 = col.iter().zip(&w).map(|(a, b)| b * (a - m) * (a - m)).sum();
        let s = v.sqrt();
        let constant = s <= CONSTANT_TOL * (1.0 + m.abs());
        (m, if constant { 1.0 } else { s }, constant)
    };

    let mut out = x.clone();
    let p = x.ncols();
    let mut st = Standardization {
        centers: vec![0.0; p],
        scales: vec![1.0; p],
        constant: vec![false; p],
        y_center: 0.0,
        y_scale: 1.0,
    };
    for j in 0..p {
        let (m, s, c) = moments(x.column(j));
        st.centers[j] = m;
        st.scales[j] = s;
        st.constant[j] = c;
        out.column_mut(j).iter_mut().for_each(|v| *v = (*v - m) / s);
    }
    let y_out = y.map(|y| {
        let (m, s, _) = moments(y);
        st.y_center = m;
        st.y_scale = s;
        y.iter().map(|v| (v - m) / s).collect()
    });
    Ok((out, y_out, st))
}

impl Standardization {
    /// Maps coefficients fitted on the transformed scale back to the
    /// original one.
    pub fn destandardize(&self, beta: &[f64], beta0: f64) -> (Vec<f64>, f64) {
        let b: Vec<f64> = beta.iter().zip(&self.scales).map(|(b, s)| self.y_scale * b / s).collect();
        let shift: f64 = b.iter().zip(&self.centers).map(|(b, c)| b * c).sum();
        (b, self.y_center + self.y_scale * beta0 - shift)
    }
}
