use std::sync::Arc;

use super::family::{apply_hessian_floor, GlmFamily};
use crate::error::{Error, Result};
use crate::gaussian::{
    penalty_value, scale_scores, BcdSolver, Diagnostics, GroupedDesign, PathResult, PenaltyConfig, SolverConfig,
    SparseCoefs, UpdateMode,
};
use crate::groups::Groups;
use crate::matrix::{score_all_groups, FeatureMatrix};

pub const DEFAULT_IRLS_MAX_ITER: usize = 100;
pub const DEFAULT_IRLS_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmConfig {
    /// Fixed offset `η⁰` added to the linear predictor.
    pub offset: Option<Vec<f64>>,
    pub irls_max_iter: usize,
    pub irls_eps: f64,
    pub intercept: bool,
    /// Settings of the weighted Gaussian solves; its mode is ignored and
    /// its intercept flag is overridden by `intercept`.
    pub inner: SolverConfig,
}

impl Default for GlmConfig {
    fn default() -> Self {
        Self {
            offset: None,
            irls_max_iter: DEFAULT_IRLS_MAX_ITER,
            irls_eps: DEFAULT_IRLS_EPS,
            intercept: true,
            inner: SolverConfig::default(),
        }
    }
}

/// `|(η⁺ − η)ᵀ(∇ℓ(η⁺) − ∇ℓ(η))| ≤ eps · max(n_active, 1)`
pub fn irls_converged(
    eta_prev: &[f64],
    eta_next: &[f64],
    grad_prev: &[f64],
    grad_next: &[f64],
    n_active_coeffs: usize,
    eps: f64,
) -> bool {
    let s: f64 = eta_next
        .iter()
        .zip(eta_prev)
        .zip(grad_next.iter().zip(grad_prev))
        .map(|((en, ep), (gn, gp))| (en - ep) * (gn - gp))
        .sum();
    s.abs() <= eps * n_active_coeffs.max(1) as f64
}

/// Coefficients and linear predictor of a GLM fit at one λ.
pub struct GlmState<'a> {
    matrix: Arc<dyn FeatureMatrix>,
    groups: &'a Groups,
    family: &'a dyn GlmFamily,
    penalty: &'a PenaltyConfig,
    config: &'a GlmConfig,
    pub beta: Vec<f64>,
    pub beta0: f64,
    /// `Xβ + β₀1 + η⁰`
    pub eta: Vec<f64>,
    in_screen: Vec<bool>,
    /// Penalized-loss increases observed across IRLS steps.
    pub nonmonotone_steps: usize,
}

impl<'a> GlmState<'a> {
    pub fn new(
        matrix: Arc<dyn FeatureMatrix>,
        groups: &'a Groups,
        family: &'a dyn GlmFamily,
        penalty: &'a PenaltyConfig,
        config: &'a GlmConfig,
    ) -> Result<Self> {
        let n = matrix.rows();
        if family.len() != n {
            return Err(Error::DimensionMismatch(format!("family has {} entries, matrix has {n} rows", family.len())));
        }
        if groups.total() != matrix.cols() {
            return Err(Error::DimensionMismatch("groups do not cover the matrix columns".into()));
        }
        if let Some(off) = &config.offset {
            if off.len() != n {
                return Err(Error::DimensionMismatch(format!("offset has length {}, expected {n}", off.len())));
            }
        }
        if !(config.irls_eps > 0.0) || config.irls_max_iter == 0 {
            return Err(Error::InvalidInput("IRLS tolerance and iteration cap must be positive".into()));
        }
        penalty.validate(groups.len())?;
        let eta = config.offset.clone().unwrap_or_else(|| vec![0.0; n]);
        let in_screen = (0..groups.len()).map(|g| penalty.unpenalized(g)).collect();
        let p = matrix.cols();
        Ok(Self {
            matrix,
            groups,
            family,
            penalty,
            config,
            beta: vec![0.0; p],
            beta0: 0.0,
            eta,
            in_screen,
            nonmonotone_steps: 0,
        })
    }

    pub fn screen(&self) -> Vec<usize> {
        (0..self.in_screen.len()).filter(|&g| self.in_screen[g]).collect()
    }

    pub fn add_to_screen(&mut self, groups: &[usize]) {
        for &g in groups {
            self.in_screen[g] = true;
        }
    }

    fn recompute_eta(&mut self) -> Result<()> {
        self.matrix.mul(&self.beta, &mut self.eta)?;
        let b0 = self.beta0;
        match &self.config.offset {
            Some(off) => self.eta.iter_mut().zip(off).for_each(|(e, o)| *e += b0 + o),
            None => self.eta.iter_mut().for_each(|e| *e += b0),
        }
        Ok(())
    }

    pub fn gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.eta.len()];
        self.family.gradient(&self.eta, &mut g);
        g
    }

    /// `‖X_gᵀ∇ℓ(η)‖₂ / (αω_g)` for every group (zero when unpenalized).
    pub fn scaled_scores(&self) -> Result<Vec<f64>> {
        let ones = vec![1.0; self.eta.len()];
        let mut s = score_all_groups(self.matrix.as_ref(), self.groups, &ones, &self.gradient())?;
        scale_scores(self.penalty, &mut s);
        Ok(s)
    }

    pub fn objective(&self, lam: f64) -> f64 {
        self.family.loss(&self.eta) + lam * penalty_value(self.groups, self.penalty, &self.beta)
    }

    fn active_coeffs(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }

    /// One proximal quasi-Newton step: solves the weighted least-squares
    /// surrogate around the current `η` over the screen set. Returns the
    /// new and old gradients.
    pub fn irls_step(&mut self, lam: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.eta.len();
        let grad = self.gradient();
        let mut w = vec![0.0; n];
        self.family.hessian_majorizer(&self.eta, &mut w);
        apply_hessian_floor(&mut w);
        let total: f64 = w.iter().sum();
        let z: Vec<f64> = (0..n)
            .map(|i| {
                let off = self.config.offset.as_ref().map_or(0.0, |o| o[i]);
                self.eta[i] - off - grad[i] / w[i]
            })
            .collect();
        let design = GroupedDesign::new(self.matrix.clone(), self.groups.clone(), Some(w), z)?;
        let inner =
            SolverConfig { mode: UpdateMode::Naive, intercept: self.config.intercept, ..self.config.inner.clone() };
        let mut solver = BcdSolver::new(&design, self.penalty, &inner)?;
        solver.set_warm_start(&self.beta, self.beta0)?;
        solver.add_to_screen(&self.screen());
        // weights were rescaled by 1/ΣW, so λ scales the same way
        solver.fit_single_lambda(lam / total)?;
        self.beta.copy_from_slice(solver.beta());
        self.beta0 = solver.intercept();
        self.recompute_eta()?;
        let loss = self.family.loss(&self.eta);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { value: loss });
        }
        Ok((self.gradient(), grad))
    }

    /// IRLS to convergence at `lam` over the current screen set. Returns the
    /// number of outer iterations.
    pub fn fit_single_lambda(&mut self, lam: f64) -> Result<usize> {
        let mut prev_obj = self.objective(lam);
        for it in 1..=self.config.irls_max_iter {
            let eta_prev = self.eta.clone();
            let (grad_next, grad_prev) = self.irls_step(lam)?;
            let obj = self.objective(lam);
            if obj > prev_obj + 1e-12 * (1.0 + prev_obj.abs()) {
                self.nonmonotone_steps += 1;
            }
            prev_obj = obj;
            if irls_converged(&eta_prev, &self.eta, &grad_prev, &grad_next, self.active_coeffs(), self.config.irls_eps)
            {
                return Ok(it);
            }
        }
        Err(Error::IterationLimit { what: "IRLS", limit: self.config.irls_max_iter })
    }

    /// Adds every penalized group outside the screen set whose scaled
    /// gradient score reaches `2λ − λ̃`.
    pub fn strong_rule_screen(&mut self, lam_prev: f64, lam: f64) -> Result<()> {
        let s = self.scaled_scores()?;
        let cut = 2.0 * lam - lam_prev;
        for (g, score) in s.iter().enumerate() {
            if !self.in_screen[g] && !self.penalty.unpenalized(g) && *score >= cut {
                self.in_screen[g] = true;
            }
        }
        Ok(())
    }

    /// Violators outside the screen set and the largest scaled score over
    /// zero penalized groups.
    pub fn kkt_check(&self, lam: f64) -> Result<(Vec<usize>, f64)> {
        let s = self.scaled_scores()?;
        let bound = lam * (1.0 + self.config.inner.kkt_slack);
        let violators =
            (0..s.len()).filter(|&g| !self.in_screen[g] && !self.penalty.unpenalized(g) && s[g] > bound).collect();
        let max_res = (0..s.len())
            .filter(|&g| !self.penalty.unpenalized(g) && self.beta[self.groups.range(g)].iter().all(|b| *b == 0.0))
            .map(|g| s[g])
            .fold(0.0, f64::max);
        Ok((violators, max_res))
    }
}

/// λ at which every penalized group is zero, with the state holding the
/// fit of the unpenalized groups and intercept.
pub fn glm_lambda_max<'a>(
    matrix: Arc<dyn FeatureMatrix>,
    groups: &'a Groups,
    family: &'a dyn GlmFamily,
    penalty: &'a PenaltyConfig,
    config: &'a GlmConfig,
) -> Result<(f64, GlmState<'a>)> {
    let mut state = GlmState::new(matrix, groups, family, penalty, config)?;
    // only unpenalized groups are screened, so λ is immaterial
    state.fit_single_lambda(1.0)?;
    let s = state.scaled_scores()?;
    let lmax = (0..groups.len()).filter(|&g| !penalty.unpenalized(g)).map(|g| s[g]).fold(0.0, f64::max);
    Ok((if lmax > 0.0 { lmax } else { 1.0 }, state))
}

/// Pathwise proximal quasi-Newton fit with strong-rule screening and KKT
/// checks on the gradient of the loss.
pub fn fit_glm_path(
    matrix: Arc<dyn FeatureMatrix>,
    groups: &Groups,
    family: &dyn GlmFamily,
    penalty: &PenaltyConfig,
    config: &GlmConfig,
) -> Result<PathResult> {
    let n = matrix.rows();
    let (lmax, mut state) = glm_lambda_max(matrix, groups, family, penalty, config)?;
    let lambdas = penalty.resolve(lmax, n, groups.total())?;
    let mut out = PathResult { lambda_max: lmax, ..Default::default() };
    let mut lam_prev = lmax;
    for (k, &lam) in lambdas.iter().enumerate() {
        if !(k == 0 && lam >= lmax * (1.0 - 1e-12)) {
            state.strong_rule_screen(lam_prev, lam)?;
        }
        let mut rounds = 0;
        let mut polish = 0;
        let mut iters = 0;
        let bound = lam * (1.0 + config.inner.kkt_slack);
        let kkt_max_residual = loop {
            iters += state.fit_single_lambda(lam)?;
            let (violators, max_res) = state.kkt_check(lam)?;
            if violators.is_empty() {
                if max_res <= bound || polish >= config.inner.max_kkt_rounds {
                    break max_res;
                }
                polish += 1;
                continue;
            }
            rounds += 1;
            if rounds > config.inner.max_kkt_rounds {
                return Err(Error::KktLoopLimit { limit: config.inner.max_kkt_rounds, lambda: lam });
            }
            state.add_to_screen(&violators);
        };
        let screen = state.screen();
        let active = screen.iter().filter(|&&g| state.beta[groups.range(g)].iter().any(|b| *b != 0.0)).count();
        out.diagnostics.push(Diagnostics {
            cycles: 0,
            kkt_rounds: rounds,
            kkt_max_residual,
            screen_size: screen.len(),
            active_size: active,
            objective: state.objective(lam),
            irls_iters: iters,
        });
        out.lambdas.push(lam);
        out.betas.push(SparseCoefs::from_dense(&state.beta));
        out.intercepts.push(state.beta0);
        lam_prev = lam;
    }
    Ok(out)
}
