use std::sync::Arc;

use super::*;
use crate::gaussian::{fit_path, lambda_max, GroupedDesign, LambdaPolicy, PenaltyConfig, SolverConfig};
use crate::groups::Groups;
use crate::matrix::testing::{random_dense, random_vec};
use crate::matrix::{DenseMatrix, FeatureMatrix};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn tight() -> GlmConfig {
    GlmConfig { irls_eps: 1e-14, inner: SolverConfig { tol: 1e-22, ..Default::default() }, ..Default::default() }
}

fn logistic_data(n: usize, p: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
    let x = random_dense(n, p, seed);
    let u = random_vec(n, seed + 1, true);
    let y = (0..n)
        .map(|i| {
            let s = 1.5 * x.get(i, 0) - x.get(i, 1) + 0.3;
            let prob = 1.0 / (1.0 + (-s).exp());
            if u[i] < prob {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (x, y)
}

#[test]
fn convergence_measure_identities() {
    let e = [0.1, -0.4, 2.0];
    let g = [1.0, 0.5, -0.2];
    assert!(irls_converged(&e, &e, &g, &[3.0, 1.0, 7.0], 0, 1e-300));
    // Gaussian gradient is W(η − y), so the measure equals ‖Δη‖²_W
    let w = [0.2, 0.3, 0.5];
    let y = [1.0, 2.0, -1.0];
    let e2 = [0.3, -0.1, 1.0];
    let grad = |eta: &[f64]| -> Vec<f64> { (0..3).map(|i| w[i] * (eta[i] - y[i])).collect() };
    let expect: f64 = (0..3).map(|i| w[i] * (e2[i] - e[i]).powi(2)).sum();
    let (g1, g2) = (grad(&e), grad(&e2));
    assert!(irls_converged(&e, &e2, &g1, &g2, 1, expect * (1.0 + 1e-12)));
    assert!(!irls_converged(&e, &e2, &g1, &g2, 1, expect * (1.0 - 1e-9)));
    // the threshold scales with the active count
    assert!(irls_converged(&e, &e2, &g1, &g2, 4, expect / 3.9));
}

#[test]
fn gaussian_family_reproduces_gaussian_path() {
    let x = random_dense(30, 8, 21);
    let y = random_vec(30, 22, false);
    let w = random_vec(30, 23, true);
    let groups = Groups::from_sizes(&[2, 3, 1, 2]).unwrap();
    let pen = PenaltyConfig {
        alpha: 0.7,
        omega: vec![1.0, 0.5, 2.0, 1.0],
        lambdas: LambdaPolicy::Geometric { count: 15, ratio: Some(0.01) },
    };
    let m: Arc<dyn FeatureMatrix> = Arc::new(x);
    let design = GroupedDesign::new(m.clone(), groups.clone(), Some(w.clone()), y.clone()).unwrap();
    let reference = fit_path(&design, &pen, &SolverConfig { tol: 1e-22, ..Default::default() }).unwrap();
    let fam = Gaussian::new(y, Some(w)).unwrap();
    let res = fit_glm_path(m, &groups, &fam, &pen, &tight()).unwrap();
    assert!((res.lambda_max - reference.lambda_max).abs() <= 1e-12 * reference.lambda_max);
    for k in 0..15 {
        assert!(max_diff(&res.betas[k].to_dense(8), &reference.betas[k].to_dense(8)) <= 1e-7);
        assert!((res.intercepts[k] - reference.intercepts[k]).abs() <= 1e-7);
        // the surrogate is exact, so one step plus one confirming step
        assert!(res.diagnostics[k].irls_iters <= 2 * (1 + res.diagnostics[k].kkt_rounds));
    }
}

#[test]
fn gaussian_lambda_max_matches() {
    let x = random_dense(25, 6, 31);
    let y = random_vec(25, 32, false);
    let groups = Groups::from_sizes(&[2, 2, 2]).unwrap();
    let pen = PenaltyConfig { alpha: 1.0, omega: vec![0.0, 1.0, 2.0], lambdas: LambdaPolicy::default() };
    let m: Arc<dyn FeatureMatrix> = Arc::new(x);
    let design = GroupedDesign::new(m.clone(), groups.clone(), None, y.clone()).unwrap();
    let (expect, _) = lambda_max(&design, &pen, &SolverConfig { tol: 1e-22, ..Default::default() }).unwrap();
    let fam = Gaussian::new(y, None).unwrap();
    let cfg = tight();
    let (got, _) = glm_lambda_max(m, &groups, &fam, &pen, &cfg).unwrap();
    assert!((got - expect).abs() <= 1e-9 * expect);
}

#[test]
fn binomial_null_model_at_large_lambda() {
    let (x, y) = logistic_data(40, 4, 41);
    let w = random_vec(40, 42, true);
    let groups = Groups::singletons(4).unwrap();
    let pen = PenaltyConfig { lambdas: LambdaPolicy::Explicit(vec![1e3]), ..PenaltyConfig::lasso(4) };
    let fam = Binomial::new(y.clone(), Some(w.clone())).unwrap();
    let res = fit_glm_path(Arc::new(x), &groups, &fam, &pen, &tight()).unwrap();
    assert_eq!(res.betas[0].nnz(), 0);
    let ybar = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
    assert!((res.intercepts[0] - (ybar / (1.0 - ybar)).ln()).abs() <= 1e-8);
}

#[test]
fn binomial_path_satisfies_kkt() {
    let (x, y) = logistic_data(20, 6, 51);
    let groups = Groups::from_sizes(&[3, 3]).unwrap();
    let pen =
        PenaltyConfig { lambdas: LambdaPolicy::Geometric { count: 10, ratio: Some(0.05) }, ..PenaltyConfig::lasso(2) };
    let fam = Binomial::new(y, None).unwrap();
    let m: Arc<dyn FeatureMatrix> = Arc::new(x.clone());
    let res = fit_glm_path(m, &groups, &fam, &pen, &tight()).unwrap();
    for k in 0..res.lambdas.len() {
        let lam = res.lambdas[k];
        let beta = res.betas[k].to_dense(6);
        let mut eta = vec![0.0; 20];
        x.mul(&beta, &mut eta).unwrap();
        eta.iter_mut().for_each(|e| *e += res.intercepts[k]);
        let mut grad = vec![0.0; 20];
        fam.gradient(&eta, &mut grad);
        assert!(grad.iter().sum::<f64>().abs() <= 1e-8);
        let mut xg = vec![0.0; 6];
        x.bmul(0, 6, &[1.0; 20], &grad, &mut xg).unwrap();
        for g in 0..2 {
            let r = groups.range(g);
            let b = &beta[r.clone()];
            let s = &xg[r];
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nb == 0.0 {
                assert!(s.iter().map(|v| v * v).sum::<f64>().sqrt() <= lam * (1.0 + 1e-4));
            } else {
                for j in 0..3 {
                    assert!((s[j] + lam * b[j] / nb).abs() <= 1e-6, "lambda {k} group {g}");
                }
            }
        }
    }
}

#[test]
fn lambda_max_scales_inversely_with_penalty_factors() {
    let (x, y) = logistic_data(30, 4, 61);
    let groups = Groups::from_sizes(&[2, 2]).unwrap();
    let fam = Binomial::new(y, None).unwrap();
    let m: Arc<dyn FeatureMatrix> = Arc::new(x);
    let cfg = tight();
    let p1 = PenaltyConfig { omega: vec![1.0, 1.5], ..PenaltyConfig::lasso(2) };
    let p2 = PenaltyConfig { omega: vec![2.0, 3.0], ..PenaltyConfig::lasso(2) };
    let (a, _) = glm_lambda_max(m.clone(), &groups, &fam, &p1, &cfg).unwrap();
    let (b, _) = glm_lambda_max(m, &groups, &fam, &p2, &cfg).unwrap();
    assert!((a - 2.0 * b).abs() <= 1e-10 * a);
}

#[test]
fn gaussian_offset_matches_shifted_response() {
    let x = random_dense(25, 4, 71);
    let y = random_vec(25, 72, false);
    let off = random_vec(25, 73, false);
    let groups = Groups::from_sizes(&[2, 2]).unwrap();
    let pen =
        PenaltyConfig { lambdas: LambdaPolicy::Geometric { count: 8, ratio: Some(0.05) }, ..PenaltyConfig::lasso(2) };
    let m: Arc<dyn FeatureMatrix> = Arc::new(x);
    let with_off = GlmConfig { offset: Some(off.clone()), ..tight() };
    let a = fit_glm_path(m.clone(), &groups, &Gaussian::new(y.clone(), None).unwrap(), &pen, &with_off).unwrap();
    let shifted: Vec<f64> = y.iter().zip(&off).map(|(a, b)| a - b).collect();
    let b = fit_glm_path(m, &groups, &Gaussian::new(shifted, None).unwrap(), &pen, &tight()).unwrap();
    assert!((a.lambda_max - b.lambda_max).abs() <= 1e-12 * b.lambda_max);
    for k in 0..8 {
        assert!(max_diff(&a.betas[k].to_dense(4), &b.betas[k].to_dense(4)) <= 1e-9);
        assert!((a.intercepts[k] - b.intercepts[k]).abs() <= 1e-9);
    }
}

#[test]
fn binomial_path_needs_few_irls_steps() {
    let (x, y) = logistic_data(100, 10, 81);
    let groups = Groups::from_sizes(&[2, 2, 2, 2, 2]).unwrap();
    let pen =
        PenaltyConfig { lambdas: LambdaPolicy::Geometric { count: 30, ratio: Some(0.01) }, ..PenaltyConfig::lasso(5) };
    let fam = Binomial::new(y, None).unwrap();
    let res = fit_glm_path(Arc::new(x), &groups, &fam, &pen, &GlmConfig::default()).unwrap();
    let mut iters: Vec<usize> = res.diagnostics.iter().map(|d| d.irls_iters).collect();
    iters.sort_unstable();
    assert!(iters[iters.len() / 2] <= 5, "{iters:?}");
}

#[test]
fn poisson_path_satisfies_kkt() {
    let x = random_dense(40, 4, 91);
    let u = random_vec(40, 92, true);
    let y: Vec<f64> = (0..40).map(|i| ((0.5 * x.get(i, 0)).exp() * 3.0 * u[i]).floor()).collect();
    let groups = Groups::from_sizes(&[2, 2]).unwrap();
    let pen =
        PenaltyConfig { lambdas: LambdaPolicy::Geometric { count: 6, ratio: Some(0.1) }, ..PenaltyConfig::lasso(2) };
    let fam = Poisson::new(y, None).unwrap();
    let m: Arc<dyn FeatureMatrix> = Arc::new(x.clone());
    let res = fit_glm_path(m, &groups, &fam, &pen, &tight()).unwrap();
    let last = res.lambdas.len() - 1;
    let beta = res.betas[last].to_dense(4);
    let mut eta = vec![0.0; 40];
    x.mul(&beta, &mut eta).unwrap();
    eta.iter_mut().for_each(|e| *e += res.intercepts[last]);
    let mut grad = vec![0.0; 40];
    fam.gradient(&eta, &mut grad);
    let mut xg = vec![0.0; 4];
    x.bmul(0, 4, &[1.0; 40], &grad, &mut xg).unwrap();
    for g in 0..2 {
        let r = groups.range(g);
        let nb = beta[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
        let ns = xg[r].iter().map(|v| v * v).sum::<f64>().sqrt();
        if nb == 0.0 {
            assert!(ns <= res.lambdas[last] * (1.0 + 1e-4));
        } else {
            assert!((ns - res.lambdas[last]).abs() <= 1e-6);
        }
    }
    assert!(res.diagnostics.iter().all(|d| d.objective.is_finite()));
}

#[test]
fn rejects_mismatched_inputs() {
    let x = random_dense(10, 2, 1);
    let groups = Groups::singletons(2).unwrap();
    let pen = PenaltyConfig::lasso(2);
    let fam = Gaussian::new(vec![0.0; 9], None).unwrap();
    assert!(fit_glm_path(Arc::new(x.clone()), &groups, &fam, &pen, &GlmConfig::default()).is_err());
    let fam = Gaussian::new(vec![0.0; 10], None).unwrap();
    let cfg = GlmConfig { offset: Some(vec![0.0; 3]), ..Default::default() };
    assert!(fit_glm_path(Arc::new(x), &groups, &fam, &pen, &cfg).is_err());
}
