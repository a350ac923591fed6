use super::{Diagnostics, GroupedDesign, PenaltyConfig, SolverConfig, UpdateMode};
use crate::eigen::{gram_eigen, SymEigen};
use crate::error::{Error, Result};
use crate::kernel::{soft_threshold, solve_bcd, DiagQuadProblem, DEFAULT_EPS, DEFAULT_MAX_ITER, SIGMA_TOL};
use crate::matrix::score_all_groups;

/// Reported after every group update that changed the coefficients.
pub struct UpdateEvent<'e> {
    pub group: usize,
    pub lambda: f64,
    /// `Δβ_g` in the original coordinates.
    pub delta: &'e [f64],
    /// `p_g⁻¹ ‖X_g Δβ_g‖²_W`, evaluated in the eigenbasis.
    pub measure: f64,
    /// Block problem handed to the Newton-ABS kernel, when it was used.
    pub problem: Option<&'e DiagQuadProblem>,
}

pub type Observer<'a> = Box<dyn FnMut(&UpdateEvent) + 'a>;

/// Covariance-mode bookkeeping.
struct CovState {
    /// `XᵀW r` over all columns.
    gamma: Vec<f64>,
    /// `1ᵀW r`
    resid_wsum: f64,
    /// `XᵀW1`
    xtw1: Vec<f64>,
    /// `XᵀWX_g`, column-major `p × p_g`, filled on first use.
    cols: Vec<Option<Vec<f64>>>,
    used: usize,
}

/// Block-coordinate descent state for one weighted Gaussian problem.
pub struct BcdSolver<'a> {
    design: &'a GroupedDesign,
    penalty: &'a PenaltyConfig,
    config: SolverConfig,
    beta: Vec<f64>,
    beta0: f64,
    /// `y − β₀ − Xβ` (naive mode only).
    resid: Vec<f64>,
    cov: Option<CovState>,
    eigen: Vec<Option<SymEigen>>,
    in_screen: Vec<bool>,
    screen: Vec<usize>,
    active: Vec<usize>,
    observer: Option<Observer<'a>>,
}

impl<'a> BcdSolver<'a> {
    pub fn new(design: &'a GroupedDesign, penalty: &'a PenaltyConfig, config: &SolverConfig) -> Result<Self> {
        let ng = design.groups().len();
        penalty.validate(ng)?;
        if !(config.tol > 0.0) || config.max_cycles == 0 {
            return Err(Error::InvalidInput("tolerance and cycle cap must be positive".into()));
        }
        let p = design.p();
        let mut s = Self {
            design,
            penalty,
            config: config.clone(),
            beta: vec![0.0; p],
            beta0: 0.0,
            resid: Vec::new(),
            cov: None,
            eigen: vec![None; ng],
            in_screen: vec![false; ng],
            screen: Vec::new(),
            active: Vec::new(),
            observer: None,
        };
        if config.mode == UpdateMode::Covariance {
            let ones = vec![1.0; design.n()];
            let mut xtw1 = vec![0.0; p];
            design.matrix().bmul(0, p, design.weights(), &ones, &mut xtw1)?;
            s.cov = Some(CovState { gamma: vec![0.0; p], resid_wsum: 0.0, xtw1, cols: vec![None; ng], used: 0 });
        }
        s.refresh_residual()?;
        s.reset_screen_to_unpenalized();
        Ok(s)
    }

    pub fn set_observer(&mut self, observer: Observer<'a>) {
        self.observer = Some(observer);
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn intercept(&self) -> f64 {
        self.beta0
    }

    pub fn screen(&self) -> &[usize] {
        &self.screen
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Replaces the coefficients and rebuilds the residual or gradient.
    /// Groups with nonzero coefficients join the screen set.
    pub fn set_warm_start(&mut self, beta: &[f64], beta0: f64) -> Result<()> {
        if beta.len() != self.beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "warm start has length {}, expected {}",
                beta.len(),
                self.beta.len()
            )));
        }
        self.beta.copy_from_slice(beta);
        self.beta0 = if self.config.intercept { beta0 } else { 0.0 };
        self.refresh_residual()?;
        let groups = self.design.groups();
        let nonzero: Vec<usize> =
            (0..groups.len()).filter(|&g| self.beta[groups.range(g)].iter().any(|b| *b != 0.0)).collect();
        self.add_to_screen(&nonzero);
        Ok(())
    }

    /// `𝒮 = U`, the groups carrying no penalty.
    pub fn reset_screen_to_unpenalized(&mut self) {
        self.in_screen.iter_mut().for_each(|s| *s = false);
        self.screen.clear();
        let u: Vec<usize> = (0..self.in_screen.len()).filter(|&g| self.penalty.unpenalized(g)).collect();
        self.add_to_screen(&u);
    }

    pub fn add_to_screen(&mut self, groups: &[usize]) {
        for &g in groups {
            if !self.in_screen[g] {
                self.in_screen[g] = true;
                self.screen.push(g);
            }
        }
        self.screen.sort_unstable();
    }

    /// Current residual `y − β₀ − Xβ`, recomputed in covariance mode.
    pub fn residual(&self) -> Result<Vec<f64>> {
        if self.cov.is_none() {
            return Ok(self.resid.clone());
        }
        self.fresh_residual()
    }

    fn fresh_residual(&self) -> Result<Vec<f64>> {
        let mut eta = vec![0.0; self.design.n()];
        self.design.matrix().mul(&self.beta, &mut eta)?;
        Ok(self.design.y().iter().zip(&eta).map(|(y, e)| y - self.beta0 - e).collect())
    }

    fn refresh_residual(&mut self) -> Result<()> {
        let r = self.fresh_residual()?;
        let p = self.beta.len();
        match self.cov.as_mut() {
            None => self.resid = r,
            Some(cov) => {
                let w = self.design.weights();
                self.design.matrix().bmul(0, p, w, &r, &mut cov.gamma)?;
                cov.resid_wsum = w.iter().zip(&r).map(|(a, b)| a * b).sum();
            }
        }
        Ok(())
    }

    /// `‖X_gᵀW r‖₂` for every group.
    pub fn scores(&self) -> Result<Vec<f64>> {
        let groups = self.design.groups();
        match &self.cov {
            None => score_all_groups(self.design.matrix(), groups, self.design.weights(), &self.resid),
            Some(cov) => Ok((0..groups.len())
                .map(|g| cov.gamma[groups.range(g)].iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect()),
        }
    }

    /// Scores divided by `αω_g`; zero for unpenalized groups.
    pub fn scaled_scores(&self) -> Result<Vec<f64>> {
        let mut s = self.scores()?;
        scale_scores(self.penalty, &mut s);
        Ok(s)
    }

    fn ensure_eigen(&mut self, g: usize) -> Result<()> {
        if self.eigen[g].is_none() {
            let groups = self.design.groups();
            let gram = self.design.matrix().gram_block(groups.start(g), groups.size(g), self.design.weights())?;
            self.eigen[g] = Some(gram_eigen(&gram, groups.size(g))?);
        }
        Ok(())
    }

    fn ensure_cov_cols(&mut self, g: usize) -> Result<()> {
        let Some(cov) = self.cov.as_mut() else { return Ok(()) };
        if cov.cols[g].is_some() {
            return Ok(());
        }
        let groups = self.design.groups();
        let (start, size) = (groups.start(g), groups.size(g));
        let p = self.beta.len();
        let requested = cov.used + p * size;
        if requested > self.config.cov_budget {
            return Err(Error::MemoryBudgetExceeded { requested, budget: self.config.cov_budget });
        }
        let m = self.design.matrix();
        let mut block = vec![0.0; p * size];
        let mut col = vec![0.0; self.design.n()];
        for k in 0..size {
            col.iter_mut().for_each(|c| *c = 0.0);
            m.btmul(start + k, 1, &[1.0], &mut col)?;
            m.bmul(0, p, self.design.weights(), &col, &mut block[k * p..(k + 1) * p])?;
        }
        cov.cols[g] = Some(block);
        cov.used = requested;
        Ok(())
    }

    /// Exact minimization over group `g` with everything else fixed.
    /// Returns the convergence contribution `p_g⁻¹ ‖Q_gᵀΔβ_g‖²_Λ`.
    pub fn update_group(&mut self, g: usize, lam: f64) -> Result<f64> {
        self.ensure_eigen(g)?;
        let groups = self.design.groups();
        let (start, pg) = (groups.start(g), groups.size(g));
        let omega = self.penalty.omega[g];
        let alpha = self.penalty.alpha;
        let lam_kernel = lam * omega * alpha;
        let ridge = lam * omega * (1.0 - alpha);

        let mut grad = vec![0.0; pg];
        match &self.cov {
            None => self.design.matrix().bmul(start, pg, self.design.weights(), &self.resid, &mut grad)?,
            Some(cov) => grad.copy_from_slice(&cov.gamma[start..start + pg]),
        }

        let eig = self.eigen[g].take().expect("eigendecomposition cached above");
        let mut bt = vec![0.0; pg];
        eig.rotate_in(&self.beta[start..start + pg], &mut bt);
        let mut v = vec![0.0; pg];
        eig.rotate_in(&grad, &mut v);
        for i in 0..pg {
            v[i] += eig.values[i] * bt[i];
        }
        let sigma: Vec<f64> = eig.values.iter().map(|l| l + ridge).collect();

        let mut problem = None;
        let x: Vec<f64> = if lam_kernel == 0.0 {
            let cutoff = SIGMA_TOL * sigma.iter().cloned().fold(0.0, f64::max);
            (0..pg).map(|i| if sigma[i] > cutoff { v[i] / sigma[i] } else { bt[i] }).collect()
        } else if pg == 1 {
            vec![soft_threshold(sigma[0], v[0], lam_kernel)]
        } else {
            let p = DiagQuadProblem::new(sigma, v, lam_kernel)?;
            let sol = solve_bcd(&p, DEFAULT_EPS, DEFAULT_MAX_ITER)?;
            problem = Some(p);
            sol.x
        };

        let dx: Vec<f64> = x.iter().zip(&bt).map(|(a, b)| a - b).collect();
        if dx.iter().all(|d| *d == 0.0) {
            self.eigen[g] = Some(eig);
            return Ok(0.0);
        }
        let measure = dx.iter().zip(&eig.values).map(|(d, l)| l * d * d).sum::<f64>() / pg as f64;
        let mut fresh = vec![0.0; pg];
        eig.rotate_out(&x, &mut fresh);
        self.eigen[g] = Some(eig);
        let mut delta = vec![0.0; pg];
        for ((b, d), f) in self.beta[start..start + pg].iter_mut().zip(delta.iter_mut()).zip(&fresh) {
            *d = f - *b;
            *b = *f;
        }

        if self.cov.is_none() {
            let neg: Vec<f64> = delta.iter().map(|d| -d).collect();
            self.design.matrix().btmul(start, pg, &neg, &mut self.resid)?;
        } else {
            self.ensure_cov_cols(g)?;
            let cov = self.cov.as_mut().expect("covariance mode");
            let block = cov.cols[g].as_ref().expect("columns cached above");
            let p = cov.gamma.len();
            for (k, d) in delta.iter().enumerate() {
                for (gm, c) in cov.gamma.iter_mut().zip(&block[k * p..(k + 1) * p]) {
                    *gm -= c * d;
                }
            }
            cov.resid_wsum -= cov.xtw1[start..start + pg].iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
        }

        if let Some(obs) = self.observer.as_mut() {
            obs(&UpdateEvent { group: g, lambda: lam, delta: &delta, measure, problem: problem.as_ref() });
        }
        Ok(measure)
    }

    /// Exact update of the unpenalized intercept; returns `δ²`.
    fn update_intercept(&mut self) -> f64 {
        if !self.config.intercept {
            return 0.0;
        }
        let delta = match &self.cov {
            None => self.design.weights().iter().zip(&self.resid).map(|(w, r)| w * r).sum(),
            Some(cov) => cov.resid_wsum,
        };
        if delta == 0.0 {
            return 0.0;
        }
        self.beta0 += delta;
        match self.cov.as_mut() {
            None => self.resid.iter_mut().for_each(|r| *r -= delta),
            Some(cov) => {
                for (gm, x) in cov.gamma.iter_mut().zip(&cov.xtw1) {
                    *gm -= x * delta;
                }
                cov.resid_wsum -= delta;
            }
        }
        delta * delta
    }

    /// One pass over `groups` (and the intercept); returns the largest
    /// per-block change in the linear prediction.
    pub fn cycle(&mut self, groups: &[usize], lam: f64) -> Result<f64> {
        let mut m = self.update_intercept();
        for &g in groups {
            m = m.max(self.update_group(g, lam)?);
        }
        Ok(m)
    }

    fn refresh_active(&mut self) {
        let groups = self.design.groups();
        self.active =
            self.screen.iter().copied().filter(|&g| self.beta[groups.range(g)].iter().any(|b| *b != 0.0)).collect();
    }

    /// Active-set BCD over the screen set at a single λ. Returns the number
    /// of cycles used.
    pub fn fit_single_lambda(&mut self, lam: f64) -> Result<usize> {
        let mut cycles = 0;
        let tol = self.config.tol;
        let limit = self.config.max_cycles;
        let bump = |c: &mut usize| {
            *c += 1;
            if *c > limit {
                Err(Error::IterationLimit { what: "block coordinate descent", limit })
            } else {
                Ok(())
            }
        };
        loop {
            bump(&mut cycles)?;
            let screen = self.screen.clone();
            let m = self.cycle(&screen, lam)?;
            self.refresh_active();
            if m <= tol {
                return Ok(cycles);
            }
            loop {
                bump(&mut cycles)?;
                let active = self.active.clone();
                if self.cycle(&active, lam)? <= tol {
                    break;
                }
            }
        }
    }

    /// Strong rule: adds every penalized group with scaled score `≥ 2λ − λ̃`.
    pub fn strong_rule_screen(&mut self, lam_prev: f64, lam: f64) -> Result<()> {
        let scores = self.scaled_scores()?;
        let cut = 2.0 * lam - lam_prev;
        let keep: Vec<usize> = (0..scores.len())
            .filter(|&g| !self.in_screen[g] && !self.penalty.unpenalized(g) && scores[g] >= cut)
            .collect();
        self.add_to_screen(&keep);
        Ok(())
    }

    /// Groups outside the screen set violating dual feasibility, and the
    /// largest scaled score over zero penalized groups.
    pub fn kkt_check(&self, lam: f64) -> Result<(Vec<usize>, f64)> {
        let scores = self.scaled_scores()?;
        let groups = self.design.groups();
        let bound = lam * (1.0 + self.config.kkt_slack);
        let violators = (0..scores.len())
            .filter(|&g| !self.in_screen[g] && !self.penalty.unpenalized(g) && scores[g] > bound)
            .collect();
        let max_res = (0..scores.len())
            .filter(|&g| !self.penalty.unpenalized(g) && self.beta[groups.range(g)].iter().all(|b| *b == 0.0))
            .map(|g| scores[g])
            .fold(0.0, f64::max);
        Ok((violators, max_res))
    }

    /// Fits at `lam`, re-solving after adding KKT violators until clean and
    /// until no zero group's score exceeds `λ(1 + slack)`.
    pub fn solve_with_kkt(&mut self, lam: f64) -> Result<Diagnostics> {
        let mut cycles = 0;
        let mut rounds = 0;
        let mut polish = 0;
        let bound = lam * (1.0 + self.config.kkt_slack);
        let kkt_max_residual = loop {
            cycles += self.fit_single_lambda(lam)?;
            let (violators, max_res) = self.kkt_check(lam)?;
            if violators.is_empty() {
                if max_res <= bound || polish >= self.config.max_kkt_rounds {
                    break max_res;
                }
                // a screened group left at zero was pushed past λ by later
                // updates; another pass over the screen set picks it up
                polish += 1;
                continue;
            }
            rounds += 1;
            if rounds > self.config.max_kkt_rounds {
                return Err(Error::KktLoopLimit { limit: self.config.max_kkt_rounds, lambda: lam });
            }
            self.add_to_screen(&violators);
        };
        let r = self.residual()?;
        let loss = 0.5 * self.design.weights().iter().zip(&r).map(|(w, r)| w * r * r).sum::<f64>();
        let objective = loss + lam * super::penalty_value(self.design.groups(), self.penalty, &self.beta);
        Ok(Diagnostics {
            cycles,
            kkt_rounds: rounds,
            kkt_max_residual,
            screen_size: self.screen.len(),
            active_size: self.active.len(),
            objective,
            irls_iters: 0,
        })
    }
}

/// Divides raw group scores by `αω_g`, zeroing unpenalized groups.
pub(crate) fn scale_scores(penalty: &PenaltyConfig, scores: &mut [f64]) {
    for (g, s) in scores.iter_mut().enumerate() {
        let f = penalty.alpha * penalty.omega[g];
        *s = if f == 0.0 { 0.0 } else { *s / f };
    }
}
