//! Synthetic benchmark designs.
//!
//! Streams come from `ChaCha8Rng::seed_from_u64(seed)` with standard normals
//! drawn by the ziggurat sampler of `rand_distr::StandardNormal`. Draw order:
//! per row the shared factor then the idiosyncratic terms, then the true
//! coefficients, then the Gaussian noise, then the Bernoulli uniforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub x: DenseMatrix,
    pub y_gaussian: Vec<f64>,
    /// 0/1 labels drawn with success probability `sigmoid(Xβ)`.
    pub y_binomial: Vec<f64>,
    pub beta: Vec<f64>,
    /// Noise standard deviation giving the requested signal-to-noise ratio.
    pub noise_sd: f64,
}

fn check(n: usize, k: usize, rho: f64, snr: f64) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidInput("need at least one row and one feature".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho must lie in [0, 1], got {rho}")));
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidInput(format!("snr must be positive, got {snr}")));
    }
    Ok(())
}

/// `n × k` equi-correlated Gaussian features `√ρ Wᵢ + √(1−ρ) Zᵢⱼ`, row-major.
fn equicorrelated(rng: &mut ChaCha8Rng, n: usize, k: usize, rho: f64) -> Vec<f64> {
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut out = Vec::with_capacity(n * k);
    for _ in 0..n {
        let shared: f64 = rng.sample(StandardNormal);
        for _ in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            out.push(a * shared + b * z);
        }
    }
    out
}

fn responses(rng: &mut ChaCha8Rng, x: DenseMatrix, beta: Vec<f64>, snr: f64) -> Result<SimData> {
    let n = x.nrows();
    let mut signal = vec![0.0; n];
    crate::matrix::FeatureMatrix::mul(&x, &beta, &mut signal)?;
    let mean = signal.iter().sum::<f64>() / n as f64;
    let var = signal.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
    let noise_sd = (var / snr).sqrt();
    let y_gaussian = signal
        .iter()
        .map(|s| {
            let e: f64 = rng.sample(StandardNormal);
            s + noise_sd * e
        })
        .collect();
    let y_binomial = signal
        .iter()
        .map(|s| {
            let u: f64 = rng.random();
            if u < 1.0 / (1.0 + (-s).exp()) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(SimData { x, y_gaussian, y_binomial, beta, noise_sd })
}

/// Cubic polynomial expansion `(Y, Y², Y³)` of `groups` equi-correlated
/// features, giving `3·groups` columns; the first six coefficients are
/// standard normal and the rest zero.
pub fn simulate_group(n: usize, groups: usize, rho: f64, snr: f64, seed: u64) -> Result<SimData> {
    check(n, groups, rho, snr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = equicorrelated(&mut rng, n, groups, rho);
    let p = 3 * groups;
    let mut x = DenseMatrix::zeros(n, p);
    for i in 0..n {
        for g in 0..groups {
            let v = y[i * groups + g];
            x.set(i, 3 * g, v);
            x.set(i, 3 * g + 1, v * v);
            x.set(i, 3 * g + 2, v * v * v);
        }
    }
    let mut beta = vec![0.0; p];
    for b in beta.iter_mut().take(6) {
        *b = rng.sample(StandardNormal);
    }
    responses(&mut rng, x, beta, snr)
}

/// Lasso coefficients `βⱼ = (−1)ʲ exp(−2(j−1)/20)` for `j = 1..=p`.
pub fn lasso_beta(p: usize) -> Vec<f64> {
    (1..=p)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (-2.0 * (j as f64 - 1.0) / 20.0).exp()
        })
        .collect()
}

/// Equi-correlated Gaussian features with [`lasso_beta`] coefficients.
pub fn simulate_lasso(n: usize, p: usize, rho: f64, snr: f64, seed: u64) -> Result<SimData> {
    check(n, p, rho, snr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DenseMatrix::from_row_major(n, p, &equicorrelated(&mut rng, n, p, rho))?;
    responses(&mut rng, x, lasso_beta(p), snr)
}
