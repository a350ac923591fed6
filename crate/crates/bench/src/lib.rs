//! Problem generators shared by the criterion benches.

use std::sync::Arc;

use groupnet::simulate::simulate_group;
use groupnet::standardize::standardize;
use groupnet::{DiagQuadProblem, FeatureMatrix, GroupedDesign, Groups, LambdaPolicy, PenaltyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Block subproblems of dimension `d`. With `hard`, the spectrum spans
/// twelve decades and `λ` sits just below `‖v‖₂`.
pub fn kernel_instances(count: usize, d: usize, hard: bool, seed: u64) -> Vec<DiagQuadProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let sigma: Vec<f64> = (0..d)
                .map(|_| if hard { 10f64.powf(rng.random_range(-12.0..0.0)) } else { rng.random_range(0.1..2.0) })
                .collect();
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let lam = if hard { vn * (1.0 - 1e-6) } else { vn * rng.random_range(0.05..0.9) };
            DiagQuadProblem::new(sigma, v, lam).expect("valid instance")
        })
        .collect()
}

/// Standardized simulated group design with `groups` blocks of three columns.
pub fn group_design(n: usize, groups: usize, rho: f64, seed: u64) -> (GroupedDesign, Vec<f64>) {
    let d = simulate_group(n, groups, rho, 3.0, seed).expect("simulation");
    let (x, y, _) = standardize(&d.x, Some(&d.y_gaussian), &vec![1.0; n]).expect("standardize");
    let x: Arc<dyn FeatureMatrix> = Arc::new(x);
    let groups = Groups::uniform(3 * groups, 3).expect("groups");
    (GroupedDesign::new(x, groups, None, y.expect("response")).expect("design"), d.y_binomial)
}

pub fn group_penalty(groups: usize, count: usize) -> PenaltyConfig {
    PenaltyConfig {
        alpha: 1.0,
        omega: vec![3f64.sqrt(); groups],
        lambdas: LambdaPolicy::Geometric { count, ratio: Some(0.01) },
    }
}
