//! Pathwise block-coordinate descent for the Gaussian group elastic net
//!
//! ```text
//! ½‖y − β₀1 − Xβ‖²_W + λ Σ_g ω_g (α‖β_g‖₂ + (1−α)/2 ‖β_g‖₂²)
//! ```
//!
//! with `1ᵀW1 = 1`.

mod solver;

use std::sync::Arc;

pub(crate) use solver::scale_scores;
pub use solver::{BcdSolver, Observer, UpdateEvent};

use crate::error::{Error, Result};
use crate::groups::Groups;
use crate::matrix::FeatureMatrix;

/// Relative slack allowed on dual feasibility.
pub const DEFAULT_KKT_SLACK: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_CYCLES: usize = 10_000;
pub const DEFAULT_MAX_KKT_ROUNDS: usize = 100;
/// Cap on cached `XᵀWX_g` entries in covariance mode (1 GiB of f64).
pub const DEFAULT_COV_BUDGET: usize = 1 << 27;

/// Feature matrix, group partition, normalized observation weights and response.
#[derive(Clone)]
pub struct GroupedDesign {
    matrix: Arc<dyn FeatureMatrix>,
    groups: Groups,
    weights: Vec<f64>,
    y: Vec<f64>,
}

impl GroupedDesign {
    /// Weights default to uniform and are rescaled to sum to one.
    pub fn new(matrix: Arc<dyn FeatureMatrix>, groups: Groups, weights: Option<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let n = matrix.rows();
        if groups.total() != matrix.cols() {
            return Err(Error::DimensionMismatch(format!(
                "groups cover {} columns, matrix has {}",
                groups.total(),
                matrix.cols()
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!("response has length {}, expected {n}", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("response contains non-finite values".into()));
        }
        let weights = normalize_weights(weights, n)?;
        Ok(Self { matrix, groups, weights, y })
    }

    pub fn matrix(&self) -> &dyn FeatureMatrix {
        self.matrix.as_ref()
    }

    pub fn matrix_arc(&self) -> &Arc<dyn FeatureMatrix> {
        &self.matrix
    }

    pub fn groups(&self) -> &Groups {
        &self.groups
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.groups.total()
    }

    /// Same matrix and groups with new weights and response.
    pub fn reweighted(&self, weights: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(self.matrix.clone(), self.groups.clone(), Some(weights), y)
    }
}

pub(crate) fn normalize_weights(weights: Option<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    let Some(mut w) = weights else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!("weights have length {}, expected {n}", w.len())));
    }
    if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPolicy {
    /// Strictly decreasing, positive values.
    Explicit(Vec<f64>),
    /// `count` values from `λ_max` down to `ratio·λ_max`. A missing ratio
    /// means 0.01 when `n < p` and 1e-4 otherwise.
    Geometric { count: usize, ratio: Option<f64> },
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Geometric { count: 100, ratio: None }
    }
}

/// Mixing parameter `α`, per-group factors `ω` and the λ sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub omega: Vec<f64>,
    pub lambdas: LambdaPolicy,
}

impl PenaltyConfig {
    /// Group lasso (`α = 1`) with unit factors and the default path.
    pub fn lasso(groups: usize) -> Self {
        Self { alpha: 1.0, omega: vec![1.0; groups], lambdas: LambdaPolicy::default() }
    }

    pub fn validate(&self, groups: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.omega.len() != groups {
            return Err(Error::DimensionMismatch(format!("{} penalty factors for {groups} groups", self.omega.len())));
        }
        if self.omega.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("penalty factors must be finite and nonnegative".into()));
        }
        match &self.lambdas {
            LambdaPolicy::Explicit(l) => {
                if l.is_empty() || l.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidInput("lambda values must be positive".into()));
                }
                if l.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::InvalidInput("lambda values must be strictly decreasing".into()));
                }
            }
            LambdaPolicy::Geometric { count, ratio } => {
                if *count == 0 {
                    return Err(Error::InvalidInput("lambda count must be at least 1".into()));
                }
                if let Some(r) = ratio {
                    if !(*r > 0.0 && *r <= 1.0) {
                        return Err(Error::InvalidInput(format!("lambda ratio must lie in (0, 1], got {r}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether group `g` carries no penalty at all.
    pub fn unpenalized(&self, g: usize) -> bool {
        self.alpha * self.omega[g] == 0.0
    }

    /// Sequence of λ values for a problem with `n` rows and `p` columns.
    pub fn resolve(&self, lmax: f64, n: usize, p: usize) -> Result<Vec<f64>> {
        match &self.lambdas {
            LambdaPolicy::Explicit(l) => Ok(l.clone()),
            LambdaPolicy::Geometric { count, ratio } => {
                let r = ratio.unwrap_or(if n < p { 0.01 } else { 1e-4 });
                lambda_path(lmax, *count, r)
            }
        }
    }
}

/// Bookkeeping strategy for the block updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// Track the residual `r = y − β₀ − Xβ`.
    #[default]
    Naive,
    /// Track the gradient `XᵀWr` with cached `XᵀWX_g` columns.
    Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: UpdateMode,
    /// Threshold on the largest per-group change in the linear prediction.
    pub tol: f64,
    pub max_cycles: usize,
    pub kkt_slack: f64,
    pub max_kkt_rounds: usize,
    pub intercept: bool,
    /// Maximum number of cached `XᵀWX_g` entries in covariance mode.
    pub cov_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: UpdateMode::Naive,
            tol: DEFAULT_TOL,
            max_cycles: DEFAULT_MAX_CYCLES,
            kkt_slack: DEFAULT_KKT_SLACK,
            max_kkt_rounds: DEFAULT_MAX_KKT_ROUNDS,
            intercept: true,
            cov_budget: DEFAULT_COV_BUDGET,
        }
    }
}

/// Coefficients stored as sorted `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCoefs {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseCoefs {
    pub fn from_dense(beta: &[f64]) -> Self {
        let (indices, values) = beta.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).unzip();
        Self { indices, values }
    }

    pub fn to_dense(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// BCD passes over the screen or active set.
    pub cycles: usize,
    /// Screen/fit/KKT rounds needed before the check came back clean.
    pub kkt_rounds: usize,
    /// Largest `‖X_gᵀ∇‖₂ / (αω_g)` over penalized groups that are zero.
    pub kkt_max_residual: f64,
    pub screen_size: usize,
    pub active_size: usize,
    pub objective: f64,
    /// Outer iterations (GLM fits only).
    pub irls_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    pub betas: Vec<SparseCoefs>,
    pub intercepts: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    /// Value used for the path start.
    pub lambda_max: f64,
}

/// `count` values geometrically spaced from `lmax` to `ratio·lmax`.
pub fn lambda_path(lmax: f64, count: usize, ratio: f64) -> Result<Vec<f64>> {
    if !(lmax > 0.0) || count == 0 || !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidInput(format!("invalid path parameters lmax={lmax}, count={count}, ratio={ratio}")));
    }
    if count == 1 {
        return Ok(vec![lmax]);
    }
    let step = ratio.ln() / (count - 1) as f64;
    Ok((0..count).map(|k| lmax * (step * k as f64).exp()).collect())
}

/// Smallest λ at which every penalized group is zero, together with the fit
/// of the unpenalized groups (and intercept) that attains it. Returns the
/// sentinel `1.0` when no group is penalized or the gradient vanishes.
pub fn lambda_max<'a>(
    design: &'a GroupedDesign,
    penalty: &'a PenaltyConfig,
    config: &SolverConfig,
) -> Result<(f64, BcdSolver<'a>)> {
    penalty.validate(design.groups().len())?;
    let mut solver = BcdSolver::new(design, penalty, config)?;
    solver.reset_screen_to_unpenalized();
    // the unpenalized groups carry no penalty, so any λ works here
    solver.fit_single_lambda(1.0)?;
    let scores = solver.scaled_scores()?;
    let lmax = (0..design.groups().len()).filter(|&g| !penalty.unpenalized(g)).map(|g| scores[g]).fold(0.0, f64::max);
    Ok((if lmax > 0.0 { lmax } else { 1.0 }, solver))
}

/// Fits the full regularization path with warm starts, strong-rule
/// screening and a KKT backstop at every λ.
pub fn fit_path(design: &GroupedDesign, penalty: &PenaltyConfig, config: &SolverConfig) -> Result<PathResult> {
    fit_path_observed(design, penalty, config, None)
}

/// [`fit_path`] with a callback invoked after every block update.
pub fn fit_path_observed<'a>(
    design: &'a GroupedDesign,
    penalty: &'a PenaltyConfig,
    config: &'a SolverConfig,
    observer: Option<Observer<'a>>,
) -> Result<PathResult> {
    let (lmax, mut solver) = lambda_max(design, penalty, config)?;
    if let Some(obs) = observer {
        solver.set_observer(obs);
    }
    let lambdas = penalty.resolve(lmax, design.n(), design.p())?;
    let mut out = PathResult { lambda_max: lmax, ..Default::default() };
    let mut lam_prev = lmax;
    for (k, &lam) in lambdas.iter().enumerate() {
        // at λ_max the screen set is exactly the unpenalized groups
        let at_start = k == 0 && lam >= lmax * (1.0 - 1e-12);
        if !at_start {
            solver.strong_rule_screen(lam_prev, lam)?;
        }
        let diag = solver.solve_with_kkt(lam)?;
        out.lambdas.push(lam);
        out.betas.push(SparseCoefs::from_dense(solver.beta()));
        out.intercepts.push(solver.intercept());
        out.diagnostics.push(diag);
        lam_prev = lam;
    }
    Ok(out)
}

/// Penalized objective `½‖y − β₀ − Xβ‖²_W + λ P(β)`.
pub fn objective(design: &GroupedDesign, penalty: &PenaltyConfig, beta: &[f64], beta0: f64, lam: f64) -> Result<f64> {
    let mut eta = vec![0.0; design.n()];
    design.matrix().mul(beta, &mut eta)?;
    let loss: f64 = design
        .y()
        .iter()
        .zip(&eta)
        .zip(design.weights())
        .map(|((y, e), w)| {
            let r = y - beta0 - e;
            w * r * r
        })
        .sum::<f64>()
        * 0.5;
    Ok(loss + lam * penalty_value(design.groups(), penalty, beta))
}

/// `Σ_g ω_g (α‖β_g‖₂ + (1−α)/2 ‖β_g‖₂²)`
pub fn penalty_value(groups: &Groups, penalty: &PenaltyConfig, beta: &[f64]) -> f64 {
    (0..groups.len())
        .map(|g| {
            let sq: f64 = beta[groups.range(g)].iter().map(|b| b * b).sum();
            penalty.omega[g] * (penalty.alpha * sq.sqrt() + 0.5 * (1.0 - penalty.alpha) * sq)
        })
        .sum()
}
