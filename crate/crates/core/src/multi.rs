//! Multi-response fits reduced to the single-response solvers.
//!
//! Coefficients of the `p × c` matrix `B` are stored class-fastest, entry
//! `(j, l)` at index `j·c + l`. The flattened design is
//! `[(1 ⊗ I_c)  (X ⊗ I_c)]` with the intercept block as one unpenalized
//! group of size `c`, and responses, offsets and linear predictors use the
//! same interleaved row order `i·c + l`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gaussian::{fit_path, Diagnostics, GroupedDesign, LambdaPolicy, PenaltyConfig, SolverConfig, SparseCoefs};
use crate::glm::{fit_glm_path, GlmConfig, MultiGaussian, Multinomial};
use crate::groups::Groups;
use crate::matrix::{Concatenated, DenseMatrix, FeatureMatrix, KroneckerIdentity};

/// How the entries of `B` are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiMode {
    /// Each row `B_j·` is one group of size `c`.
    #[default]
    Grouped,
    /// Each entry is its own group.
    Ungrouped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiFamily {
    MultiGaussian,
    Multinomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPenaltySpec {
    pub mode: MultiMode,
    pub alpha: f64,
    /// Length `p` when grouped, `p·c` when ungrouped; `None` means all ones.
    pub omega: Option<Vec<f64>>,
    pub lambdas: LambdaPolicy,
}

impl Default for MultiPenaltySpec {
    fn default() -> Self {
        Self { mode: MultiMode::Grouped, alpha: 1.0, omega: None, lambdas: LambdaPolicy::default() }
    }
}

/// `vec(Bᵀ)` of a row-major `p × c` matrix given as rows.
pub fn flatten_coeffs(b: &[Vec<f64>]) -> Result<Vec<f64>> {
    let c = b.first().map_or(0, Vec::len);
    if b.iter().any(|r| r.len() != c) {
        return Err(Error::DimensionMismatch("coefficient rows differ in length".into()));
    }
    Ok(b.concat())
}

/// Inverse of [`flatten_coeffs`].
pub fn unflatten_coeffs(v: &[f64], classes: usize) -> Result<Vec<Vec<f64>>> {
    if classes == 0 || !v.len().is_multiple_of(classes) {
        return Err(Error::DimensionMismatch(format!("length {} is not a multiple of {classes}", v.len())));
    }
    Ok(v.chunks(classes).map(<[f64]>::to_vec).collect())
}

/// Flattened multi-response problem.
pub struct MultiDesign {
    pub matrix: Arc<dyn FeatureMatrix>,
    pub groups: Groups,
    pub penalty: PenaltyConfig,
    pub classes: usize,
    /// Number of leading columns that hold the intercepts (0 or `c`).
    pub intercept_cols: usize,
}

impl MultiDesign {
    pub fn features(&self) -> usize {
        (self.matrix.cols() - self.intercept_cols) / self.classes
    }
}

/// Builds the Kronecker design, groups and penalty factors. `x` has `n`
/// rows; the response length `n·c` is checked by the caller.
pub fn build_multi_design(
    x: Arc<dyn FeatureMatrix>,
    classes: usize,
    spec: &MultiPenaltySpec,
    intercept: bool,
) -> Result<MultiDesign> {
    let (n, p) = (x.rows(), x.cols());
    let c = classes;
    let kron: Arc<dyn FeatureMatrix> = Arc::new(KroneckerIdentity::new(x, c)?);
    let (grouped_sizes, feature_omega) = match spec.mode {
        MultiMode::Grouped => (vec![c; p], spec.omega.clone().unwrap_or_else(|| vec![1.0; p])),
        MultiMode::Ungrouped => (vec![1; p * c], spec.omega.clone().unwrap_or_else(|| vec![1.0; p * c])),
    };
    if feature_omega.len() != grouped_sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} penalty factors for {} groups",
            feature_omega.len(),
            grouped_sizes.len()
        )));
    }
    let (matrix, sizes, omega, intercept_cols) = if intercept {
        let ones: Arc<dyn FeatureMatrix> =
            Arc::new(KroneckerIdentity::new(Arc::new(DenseMatrix::from_col_major(n, 1, vec![1.0; n])?), c)?);
        let m: Arc<dyn FeatureMatrix> = Arc::new(Concatenated::new(vec![ones, kron])?);
        let sizes = std::iter::once(c).chain(grouped_sizes).collect::<Vec<_>>();
        let omega = std::iter::once(0.0).chain(feature_omega).collect::<Vec<_>>();
        (m, sizes, omega, c)
    } else {
        (kron, grouped_sizes, feature_omega, 0)
    };
    let penalty = PenaltyConfig { alpha: spec.alpha, omega, lambdas: spec.lambdas.clone() };
    let groups = Groups::from_sizes(&sizes)?;
    penalty.validate(groups.len())?;
    Ok(MultiDesign { matrix, groups, penalty, classes: c, intercept_cols })
}

/// Path over a multi-response problem. Coefficients are `vec(Bᵀ)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiPathResult {
    pub classes: usize,
    pub lambdas: Vec<f64>,
    pub lambda_max: f64,
    pub coefs: Vec<SparseCoefs>,
    /// One intercept per class at each λ.
    pub intercepts: Vec<Vec<f64>>,
    pub diagnostics: Vec<Diagnostics>,
}

impl MultiPathResult {
    pub fn coef_matrix(&self, k: usize, p: usize) -> Vec<Vec<f64>> {
        unflatten_coeffs(&self.coefs[k].to_dense(p * self.classes), self.classes).unwrap_or_default()
    }
}

/// Fits a multi-response path. `y` is interleaved (`n·c`); for the
/// multinomial family each row is a probability vector over the classes.
/// The offset in `config`, if any, is interleaved as well.
///
/// λ is on the scale of the multi-response loss with weights summing to 1.
pub fn fit_multi_path(
    x: Arc<dyn FeatureMatrix>,
    y: &[f64],
    w: Option<Vec<f64>>,
    classes: usize,
    spec: &MultiPenaltySpec,
    family: MultiFamily,
    config: &GlmConfig,
) -> Result<MultiPathResult> {
    let (n, p) = (x.rows(), x.cols());
    let c = classes;
    if c == 0 || y.len() != n * c {
        return Err(Error::DimensionMismatch(format!("response has length {}, expected {n}·{c}", y.len())));
    }
    if let Some(off) = &config.offset {
        if off.len() != n * c {
            return Err(Error::DimensionMismatch(format!("offset has length {}, expected {}", off.len(), n * c)));
        }
    }
    let mut spec = spec.clone();
    if let LambdaPolicy::Geometric { count, ratio: None } = spec.lambdas {
        // default ratio follows the unflattened shape
        spec.lambdas = LambdaPolicy::Geometric { count, ratio: Some(if n < p { 0.01 } else { 1e-4 }) };
    }
    let design = build_multi_design(x, c, &spec, config.intercept)?;
    let ic = design.intercept_cols;

    let (res, scale) = match family {
        MultiFamily::MultiGaussian => {
            // validates the response and weights
            MultiGaussian::new(y.to_vec(), w.clone(), c)?;
            let w = crate::gaussian::normalize_weights(w, n)?;
            let wide: Vec<f64> = (0..n * c).map(|k| w[k / c]).collect();
            let z: Vec<f64> = match &config.offset {
                Some(off) => y.iter().zip(off).map(|(a, b)| a - b).collect(),
                None => y.to_vec(),
            };
            // the flattened weights sum to 1, a factor c below the row weights
            let cf = c as f64;
            let mut penalty = design.penalty.clone();
            if let LambdaPolicy::Explicit(l) = &mut penalty.lambdas {
                l.iter_mut().for_each(|v| *v /= cf);
            }
            let gd = GroupedDesign::new(design.matrix.clone(), design.groups.clone(), Some(wide), z)?;
            let inner = SolverConfig { intercept: false, ..config.inner.clone() };
            (fit_path(&gd, &penalty, &inner)?, cf)
        }
        MultiFamily::Multinomial => {
            let fam = Multinomial::new(y.to_vec(), w, c)?;
            let cfg = GlmConfig { intercept: false, ..config.clone() };
            (fit_glm_path(design.matrix.clone(), &design.groups, &fam, &design.penalty, &cfg)?, 1.0)
        }
    };

    let mut out = MultiPathResult { classes: c, lambda_max: res.lambda_max * scale, ..Default::default() };
    for (k, beta) in res.betas.iter().enumerate() {
        let dense = beta.to_dense(ic + p * c);
        out.intercepts.push(if ic > 0 { dense[..c].to_vec() } else { vec![0.0; c] });
        out.coefs.push(SparseCoefs::from_dense(&dense[ic..]));
        out.lambdas.push(res.lambdas[k] * scale);
        let mut d = res.diagnostics[k].clone();
        d.kkt_max_residual *= scale;
        d.objective *= scale;
        if ic > 0 {
            // the intercept block is not a feature group
            d.screen_size = d.screen_size.saturating_sub(1);
            d.active_size = d.active_size.saturating_sub(usize::from(dense[..c].iter().any(|v| *v != 0.0)));
        }
        out.diagnostics.push(d);
    }
    Ok(out)
}

/// Interleaved linear predictor `vec((XB + 1β₀ᵀ)ᵀ)` for one path point.
pub fn multi_predict(x: &dyn FeatureMatrix, res: &MultiPathResult, k: usize) -> Result<Vec<f64>> {
    let c = res.classes;
    let kron = KroneckerIdentity::new(Arc::new(x.to_dense()), c)?;
    let mut eta = vec![0.0; x.rows() * c];
    kron.mul(&res.coefs[k].to_dense(x.cols() * c), &mut eta)?;
    for (i, e) in eta.iter_mut().enumerate() {
        *e += res.intercepts[k][i % c];
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::fit_path;
    use crate::glm::Binomial;
    use crate::matrix::testing::{random_dense, random_vec};

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn tight() -> GlmConfig {
        GlmConfig { irls_eps: 1e-16, inner: SolverConfig { tol: 1e-24, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn flatten_round_trip() {
        let b = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let v = flatten_coeffs(&b).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unflatten_coeffs(&v, 2).unwrap(), b);
        assert!(flatten_coeffs(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(unflatten_coeffs(&v, 3).is_err());
    }

    #[test]
    fn flattened_prediction_matches_matrix_product() {
        let (n, p, c) = (7, 3, 4);
        let x = random_dense(n, p, 5);
        let bflat = random_vec(p * c, 6, false);
        let kron = KroneckerIdentity::new(Arc::new(x.clone()), c).unwrap();
        let mut eta = vec![0.0; n * c];
        kron.mul(&bflat, &mut eta).unwrap();
        for i in 0..n {
            for l in 0..c {
                let direct: f64 = (0..p).map(|j| x.get(i, j) * bflat[j * c + l]).sum();
                assert!((eta[i * c + l] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn design_groups_by_mode() {
        let x: Arc<dyn FeatureMatrix> = Arc::new(random_dense(5, 3, 1));
        let spec = MultiPenaltySpec::default();
        let d = build_multi_design(x.clone(), 2, &spec, true).unwrap();
        assert_eq!(d.groups.sizes(), vec![2, 2, 2, 2]);
        assert_eq!(d.penalty.omega, vec![0.0, 1.0, 1.0, 1.0]);
        assert_eq!((d.matrix.rows(), d.matrix.cols(), d.features()), (10, 8, 3));
        let un = MultiPenaltySpec { mode: MultiMode::Ungrouped, ..Default::default() };
        let d = build_multi_design(x.clone(), 2, &un, false).unwrap();
        assert_eq!(d.groups.sizes(), vec![1; 6]);
        let bad = MultiPenaltySpec { omega: Some(vec![1.0; 6]), ..Default::default() };
        assert!(build_multi_design(x, 2, &bad, true).is_err());
    }

    #[test]
    fn intercept_block_gram_is_weighted_identity() {
        let x: Arc<dyn FeatureMatrix> = Arc::new(random_dense(4, 2, 2));
        let d = build_multi_design(x, 3, &MultiPenaltySpec::default(), true).unwrap();
        let w = random_vec(12, 3, true);
        let dense = d.matrix.to_dense();
        let gram = d.matrix.gram_block(0, 3, &w).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let expect: f64 = (0..12).map(|r| w[r] * dense.get(r, a) * dense.get(r, b)).sum();
                assert!((gram[a + 3 * b] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_class_matches_gaussian_path() {
        let x = random_dense(30, 6, 11);
        let y = random_vec(30, 12, false);
        let w = random_vec(30, 13, true);
        let lambdas = LambdaPolicy::Geometric { count: 12, ratio: Some(0.01) };
        let spec = MultiPenaltySpec {
            alpha: 0.6,
            omega: Some(vec![1.0, 2.0, 0.5, 1.0, 1.0, 3.0]),
            lambdas: lambdas.clone(),
            ..Default::default()
        };
        let res =
            fit_multi_path(Arc::new(x.clone()), &y, Some(w.clone()), 1, &spec, MultiFamily::MultiGaussian, &tight())
                .unwrap();
        let pen = PenaltyConfig { alpha: 0.6, omega: spec.omega.clone().unwrap(), lambdas };
        let gd = GroupedDesign::new(Arc::new(x), Groups::singletons(6).unwrap(), Some(w), y).unwrap();
        let reference = fit_path(&gd, &pen, &SolverConfig { tol: 1e-24, ..Default::default() }).unwrap();
        assert!((res.lambda_max - reference.lambda_max).abs() <= 1e-12 * reference.lambda_max);
        for k in 0..12 {
            assert!(max_diff(&res.coefs[k].to_dense(6), &reference.betas[k].to_dense(6)) <= 1e-7);
            assert!((res.intercepts[k][0] - reference.intercepts[k]).abs() <= 1e-7);
        }
    }

    #[test]
    fn ungrouped_matches_independent_fits() {
        let (n, p, c) = (30, 5, 3);
        let x = random_dense(n, p, 21);
        let y = random_vec(n * c, 22, false);
        let lams = vec![0.3, 0.1, 0.03, 0.01];
        let spec = MultiPenaltySpec {
            mode: MultiMode::Ungrouped,
            lambdas: LambdaPolicy::Explicit(lams.clone()),
            ..Default::default()
        };
        let res =
            fit_multi_path(Arc::new(x.clone()), &y, None, c, &spec, MultiFamily::MultiGaussian, &tight()).unwrap();
        assert_eq!(res.lambdas, lams);
        for l in 0..c {
            let yl: Vec<f64> = (0..n).map(|i| y[i * c + l]).collect();
            let gd = GroupedDesign::new(Arc::new(x.clone()), Groups::singletons(p).unwrap(), None, yl).unwrap();
            let pen = PenaltyConfig { lambdas: LambdaPolicy::Explicit(lams.clone()), ..PenaltyConfig::lasso(p) };
            let single = fit_path(&gd, &pen, &SolverConfig { tol: 1e-24, ..Default::default() }).unwrap();
            for k in 0..lams.len() {
                let b = res.coef_matrix(k, p);
                let col: Vec<f64> = b.iter().map(|r| r[l]).collect();
                assert!(max_diff(&col, &single.betas[k].to_dense(p)) <= 1e-7, "class {l} lambda {k}");
                assert!((res.intercepts[k][l] - single.intercepts[k]).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn grouped_solutions_are_row_sparse() {
        let (n, p, c) = (40, 8, 3);
        let x = random_dense(n, p, 31);
        let mut y = random_vec(n * c, 32, false);
        for i in 0..n {
            for l in 0..c {
                y[i * c + l] += (l as f64 + 1.0) * x.get(i, 0) - x.get(i, 3);
            }
        }
        let spec = MultiPenaltySpec {
            lambdas: LambdaPolicy::Geometric { count: 20, ratio: Some(0.01) },
            ..Default::default()
        };
        let res =
            fit_multi_path(Arc::new(x), &y, None, c, &spec, MultiFamily::MultiGaussian, &GlmConfig::default()).unwrap();
        let mut some_partial = false;
        for k in 0..20 {
            for row in res.coef_matrix(k, p) {
                let zeros = row.iter().filter(|v| **v == 0.0).count();
                assert!(zeros == 0 || zeros == c);
                some_partial |= zeros == c;
            }
        }
        assert!(some_partial);
        assert!(res.coefs[0].nnz() == 0 && res.coefs[19].nnz() > 0);
    }

    fn two_class_data(n: usize, p: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
        let x = random_dense(n, p, seed);
        let u = random_vec(n, seed + 1, true);
        let y = (0..n)
            .map(|i| {
                let s = x.get(i, 0) - 0.7 * x.get(i, 1) + 0.2;
                if u[i] < 1.0 / (1.0 + (-s).exp()) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn two_class_multinomial_matches_binomial() {
        let (n, p) = (60, 4);
        let (x, yb) = two_class_data(n, p, 41);
        let w = random_vec(n, 43, true);
        let onehot: Vec<f64> = yb.iter().flat_map(|v| [*v, 1.0 - *v]).collect();
        let lb = vec![0.05, 0.02, 0.008];
        // the minimum-norm split of a class difference d is (d/2, −d/2)
        let lm: Vec<f64> = lb.iter().map(|v| v * 2f64.sqrt()).collect();
        let spec = MultiPenaltySpec { lambdas: LambdaPolicy::Explicit(lm), ..Default::default() };
        let multi =
            fit_multi_path(Arc::new(x.clone()), &onehot, Some(w.clone()), 2, &spec, MultiFamily::Multinomial, &tight())
                .unwrap();
        let fam = Binomial::new(yb, Some(w)).unwrap();
        let pen = PenaltyConfig { lambdas: LambdaPolicy::Explicit(lb.clone()), ..PenaltyConfig::lasso(p) };
        let bin = fit_glm_path(Arc::new(x.clone()), &Groups::singletons(p).unwrap(), &fam, &pen, &tight()).unwrap();
        for k in 0..lb.len() {
            let em = multi_predict(&x, &multi, k).unwrap();
            let mut eb = vec![0.0; n];
            x.mul(&bin.betas[k].to_dense(p), &mut eb).unwrap();
            let diff: Vec<f64> = (0..n).map(|i| em[2 * i] - em[2 * i + 1]).collect();
            let eb: Vec<f64> = eb.iter().map(|e| e + bin.intercepts[k]).collect();
            assert!(max_diff(&diff, &eb) <= 1e-4, "lambda {k}: {}", max_diff(&diff, &eb));
        }
    }

    #[test]
    fn multinomial_null_model_matches_class_proportions() {
        let (n, p, c) = (50, 3, 3);
        let x = random_dense(n, p, 51);
        let u = random_vec(n, 52, true);
        let w = random_vec(n, 53, true);
        let y: Vec<f64> = (0..n)
            .flat_map(|i| {
                let k = ((u[i] * 3.0) as usize).min(2);
                (0..c).map(move |l| if l == k { 1.0 } else { 0.0 })
            })
            .collect();
        let spec =
            MultiPenaltySpec { lambdas: LambdaPolicy::Geometric { count: 1, ratio: Some(1.0) }, ..Default::default() };
        let res =
            fit_multi_path(Arc::new(x), &y, Some(w.clone()), c, &spec, MultiFamily::Multinomial, &tight()).unwrap();
        assert_eq!(res.coefs[0].nnz(), 0);
        let total: f64 = w.iter().sum();
        let props: Vec<f64> = (0..c).map(|l| (0..n).map(|i| w[i] * y[i * c + l]).sum::<f64>() / total).collect();
        let b0 = &res.intercepts[0];
        for l in 1..c {
            assert!(((b0[l] - b0[0]) - (props[l] / props[0]).ln()).abs() <= 1e-7);
        }
    }

    #[test]
    fn multinomial_path_kkt_residual_bounded() {
        let (n, p, c) = (40, 4, 3);
        let x = random_dense(n, p, 61);
        let u = random_vec(n, 62, true);
        let y: Vec<f64> = (0..n)
            .flat_map(|i| {
                let s = x.get(i, 0) + u[i];
                let k = if s < 0.3 {
                    0
                } else if s < 0.8 {
                    1
                } else {
                    2
                };
                (0..c).map(move |l| if l == k { 1.0 } else { 0.0 })
            })
            .collect();
        let spec = MultiPenaltySpec {
            lambdas: LambdaPolicy::Geometric { count: 10, ratio: Some(0.05) },
            ..Default::default()
        };
        let res =
            fit_multi_path(Arc::new(x), &y, None, c, &spec, MultiFamily::Multinomial, &GlmConfig::default()).unwrap();
        for (lam, d) in res.lambdas.iter().zip(&res.diagnostics) {
            assert!(d.kkt_max_residual <= lam * (1.0 + 1e-4));
        }
        assert!(res.coefs.last().unwrap().nnz() > 0);
    }

    #[test]
    fn rejects_bad_shapes() {
        let x: Arc<dyn FeatureMatrix> = Arc::new(random_dense(5, 2, 1));
        let spec = MultiPenaltySpec::default();
        assert!(fit_multi_path(
            x.clone(),
            &[0.0; 9],
            None,
            2,
            &spec,
            MultiFamily::MultiGaussian,
            &GlmConfig::default()
        )
        .is_err());
        let fam_y = vec![0.5; 10];
        let cfg = GlmConfig { offset: Some(vec![0.0; 5]), ..Default::default() };
        assert!(fit_multi_path(x, &fam_y, None, 2, &spec, MultiFamily::Multinomial, &cfg).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn flatten_then_unflatten_is_identity(
            b in (1usize..5).prop_flat_map(|c| proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, c), 0..8))
        ) {
            let c = b.first().map_or(1, Vec::len);
            let v = flatten_coeffs(&b).unwrap();
            prop_assert_eq!(v.len(), b.len() * c);
            prop_assert_eq!(unflatten_coeffs(&v, c).unwrap(), b);
        }
    }
}
