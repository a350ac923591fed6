//! Smooth convex losses fitted by proximal quasi-Newton steps on top of the
//! Gaussian solver.

mod family;
mod pqn;

pub use family::{
    apply_hessian_floor, family_by_name, softmax, Binomial, Gaussian, GlmFamily, MultiGaussian, Multinomial, Poisson,
    HESSIAN_FLOOR, POISSON_ETA_CAP,
};
pub use pqn::{
    fit_glm_path, glm_lambda_max, irls_converged, GlmConfig, GlmState, DEFAULT_IRLS_EPS, DEFAULT_IRLS_MAX_ITER,
};

#[cfg(test)]
mod tests;
