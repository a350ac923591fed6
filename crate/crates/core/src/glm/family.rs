//! Losses `ℓ(η)` with gradients and positive diagonal hessian majorizers.
//!
//! Multi-response families use the interleaved layout: entry `i·c + l` of
//! `η` is observation `i`, class `l`.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::gaussian::normalize_weights;

/// Lower bound applied to every majorizer entry.
pub const HESSIAN_FLOOR: f64 = 1e-12;
/// Default clip on `η` before exponentiating in the Poisson family.
pub const POISSON_ETA_CAP: f64 = 30.0;

pub trait GlmFamily: Send + Sync {
    fn name(&self) -> &'static str;
    /// Length of `η`.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn loss(&self, eta: &[f64]) -> f64;
    fn gradient(&self, eta: &[f64], out: &mut [f64]);
    /// Diagonal `W` with `∇²ℓ(η) ⪯ diag(W)`, before flooring.
    fn hessian_majorizer(&self, eta: &[f64], out: &mut [f64]);
    /// Classes per observation (1 for single-response families).
    fn classes(&self) -> usize {
        1
    }
}

/// `max(h, 1e-12)` elementwise.
pub fn apply_hessian_floor(h: &mut [f64]) {
    h.iter_mut().for_each(|v| *v = v.max(HESSIAN_FLOOR));
}

/// `log(1 + e^x)` without overflow.
fn log1p_exp(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_response(y: &[f64], n: usize, what: &str) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{what} response has length {}, expected {n}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} response contains non-finite values")));
    }
    Ok(())
}

/// `½(‖y − η‖²_W − ‖y‖²_W)`
#[derive(Debug, Clone)]
pub struct Gaussian {
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Gaussian {
    pub fn new(y: Vec<f64>, w: Option<Vec<f64>>) -> Result<Self> {
        let w = normalize_weights(w, y.len())?;
        check_response(&y, w.len(), "gaussian")?;
        Ok(Self { y, w })
    }
}

impl GlmFamily for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn loss(&self, eta: &[f64]) -> f64 {
        0.5 * self.y.iter().zip(eta).zip(&self.w).map(|((y, e), w)| w * ((y - e) * (y - e) - y * y)).sum::<f64>()
    }

    fn gradient(&self, eta: &[f64], out: &mut [f64]) {
        for (((o, y), e), w) in out.iter_mut().zip(&self.y).zip(eta).zip(&self.w) {
            *o = w * (e - y);
        }
    }

    fn hessian_majorizer(&self, _eta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.w);
    }
}

/// Bernoulli log-likelihood with the logit link; `y ∈ [0, 1]`.
#[derive(Debug, Clone)]
pub struct Binomial {
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Binomial {
    pub fn new(y: Vec<f64>, w: Option<Vec<f64>>) -> Result<Self> {
        let w = normalize_weights(w, y.len())?;
        check_response(&y, w.len(), "binomial")?;
        if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("binomial response must lie in [0, 1]".into()));
        }
        Ok(Self { y, w })
    }
}

impl GlmFamily for Binomial {
    fn name(&self) -> &'static str {
        "binomial"
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn loss(&self, eta: &[f64]) -> f64 {
        self.y.iter().zip(eta).zip(&self.w).map(|((y, e), w)| w * (-y * e + log1p_exp(*e))).sum()
    }

    fn gradient(&self, eta: &[f64], out: &mut [f64]) {
        for (((o, y), e), w) in out.iter_mut().zip(&self.y).zip(eta).zip(&self.w) {
            *o = -w * (y - sigmoid(*e));
        }
    }

    fn hessian_majorizer(&self, eta: &[f64], out: &mut [f64]) {
        for ((o, e), w) in out.iter_mut().zip(eta).zip(&self.w) {
            *o = w * sigmoid(*e) * sigmoid(-e);
        }
    }
}

/// Poisson log-likelihood with the log link; `η` is clipped at `cap`
/// before exponentiating.
#[derive(Debug)]
pub struct Poisson {
    y: Vec<f64>,
    w: Vec<f64>,
    cap: f64,
    clipped: AtomicUsize,
}

impl Poisson {
    pub fn new(y: Vec<f64>, w: Option<Vec<f64>>) -> Result<Self> {
        Self::with_cap(y, w, POISSON_ETA_CAP)
    }

    pub fn with_cap(y: Vec<f64>, w: Option<Vec<f64>>, cap: f64) -> Result<Self> {
        let w = normalize_weights(w, y.len())?;
        check_response(&y, w.len(), "poisson")?;
        if y.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidInput("poisson response must be nonnegative".into()));
        }
        Ok(Self { y, w, cap, clipped: AtomicUsize::new(0) })
    }

    /// Number of `η` entries clipped so far.
    pub fn clip_count(&self) -> usize {
        self.clipped.load(Ordering::Relaxed)
    }

    fn mean(&self, e: f64) -> f64 {
        if e > self.cap {
            self.clipped.fetch_add(1, Ordering::Relaxed);
            self.cap.exp()
        } else {
            e.exp()
        }
    }
}

impl GlmFamily for Poisson {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn loss(&self, eta: &[f64]) -> f64 {
        self.y.iter().zip(eta).zip(&self.w).map(|((y, e), w)| w * (-y * e + self.mean(*e))).sum()
    }

    fn gradient(&self, eta: &[f64], out: &mut [f64]) {
        for (((o, y), e), w) in out.iter_mut().zip(&self.y).zip(eta).zip(&self.w) {
            *o = w * (self.mean(*e) - y);
        }
    }

    fn hessian_majorizer(&self, eta: &[f64], out: &mut [f64]) {
        for ((o, e), w) in out.iter_mut().zip(eta).zip(&self.w) {
            *o = w * self.mean(*e);
        }
    }
}

/// Row-wise Gaussian loss over `c` responses sharing the observation weight.
#[derive(Debug, Clone)]
pub struct MultiGaussian {
    y: Vec<f64>,
    w: Vec<f64>,
    classes: usize,
}

impl MultiGaussian {
    /// `y` is interleaved, length `n·c`; `w` has length `n`.
    pub fn new(y: Vec<f64>, w: Option<Vec<f64>>, classes: usize) -> Result<Self> {
        if classes == 0 || !y.len().is_multiple_of(classes) {
            return Err(Error::DimensionMismatch("response length is not a multiple of the class count".into()));
        }
        let n = y.len() / classes;
        let w = normalize_weights(w, n)?;
        check_response(&y, n * classes, "multigaussian")?;
        Ok(Self { y, w, classes })
    }

    fn weight(&self, k: usize) -> f64 {
        self.w[k / self.classes]
    }
}

impl GlmFamily for MultiGaussian {
    fn name(&self) -> &'static str {
        "multigaussian"
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn loss(&self, eta: &[f64]) -> f64 {
        0.5 * (0..self.y.len())
            .map(|k| {
                let (y, e) = (self.y[k], eta[k]);
                self.weight(k) * ((y - e) * (y - e) - y * y)
            })
            .sum::<f64>()
    }

    fn gradient(&self, eta: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.weight(k) * (eta[k] - self.y[k]);
        }
    }

    fn hessian_majorizer(&self, _eta: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.weight(k);
        }
    }
}

/// Multinomial log-likelihood with softmax link; rows of `y` are
/// probability vectors. The majorizer is twice the hessian diagonal.
#[derive(Debug, Clone)]
pub struct Multinomial {
    y: Vec<f64>,
    w: Vec<f64>,
    classes: usize,
}

impl Multinomial {
    pub fn new(y: Vec<f64>, w: Option<Vec<f64>>, classes: usize) -> Result<Self> {
        if classes < 2 || !y.len().is_multiple_of(classes) {
            return Err(Error::DimensionMismatch("multinomial needs at least two classes and n·c responses".into()));
        }
        let n = y.len() / classes;
        let w = normalize_weights(w, n)?;
        check_response(&y, n * classes, "multinomial")?;
        for row in y.chunks(classes) {
            if row.iter().any(|v| *v < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidInput("multinomial rows must be nonnegative and sum to 1".into()));
            }
        }
        Ok(Self { y, w, classes })
    }

    /// Class probabilities of each row.
    pub fn probabilities(&self, eta: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; eta.len()];
        for (row, out) in eta.chunks(self.classes).zip(p.chunks_mut(self.classes)) {
            softmax(row, out);
        }
        p
    }
}

/// Softmax with max subtraction; returns `log Σ exp`.
pub fn softmax(row: &[f64], out: &mut [f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, e) in out.iter_mut().zip(row) {
        *o = (e - m).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    m + total.ln()
}

impl GlmFamily for Multinomial {
    fn name(&self) -> &'static str {
        "multinomial"
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn loss(&self, eta: &[f64]) -> f64 {
        let c = self.classes;
        let mut p = vec![0.0; c];
        eta.chunks(c)
            .zip(self.y.chunks(c))
            .zip(&self.w)
            .map(|((row, y), w)| {
                let lse = softmax(row, &mut p);
                w * (lse - row.iter().zip(y).map(|(e, y)| e * y).sum::<f64>())
            })
            .sum()
    }

    fn gradient(&self, eta: &[f64], out: &mut [f64]) {
        let c = self.classes;
        for (((row, y), o), w) in eta.chunks(c).zip(self.y.chunks(c)).zip(out.chunks_mut(c)).zip(&self.w) {
            softmax(row, o);
            for (oj, yj) in o.iter_mut().zip(y) {
                *oj = w * (*oj - yj);
            }
        }
    }

    fn hessian_majorizer(&self, eta: &[f64], out: &mut [f64]) {
        let c = self.classes;
        for ((row, o), w) in eta.chunks(c).zip(out.chunks_mut(c)).zip(&self.w) {
            softmax(row, o);
            o.iter_mut().for_each(|p| *p = 2.0 * w * *p * (1.0 - *p));
        }
    }
}

/// Builds a family by name. Multi-response families take the interleaved
/// response with `classes` entries per observation.
pub fn family_by_name(name: &str, y: Vec<f64>, w: Option<Vec<f64>>, classes: usize) -> Result<Box<dyn GlmFamily>> {
    Ok(match name {
        "gaussian" => Box::new(Gaussian::new(y, w)?),
        "binomial" => Box::new(Binomial::new(y, w)?),
        "poisson" => Box::new(Poisson::new(y, w)?),
        "multigaussian" => Box::new(MultiGaussian::new(y, w, classes)?),
        "multinomial" => Box::new(Multinomial::new(y, w, classes)?),
        other => return Err(Error::InvalidInput(format!("unknown family '{other}'"))),
    })
}
