//! Group elastic-net solvers built on a Newton-ABS block kernel.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod gaussian;
pub mod glm;
pub mod groups;
pub mod kernel;
pub mod matrix;
pub mod multi;
pub mod simulate;
pub mod standardize;

pub use error::{Error, Result};
pub use gaussian::{
    fit_path, Diagnostics, GroupedDesign, LambdaPolicy, PathResult, PenaltyConfig, SolverConfig, SparseCoefs,
    UpdateMode,
};
pub use glm::{family_by_name, fit_glm_path, GlmConfig, GlmFamily};
pub use groups::Groups;
pub use kernel::{solve_bcd, DiagQuadProblem, KernelSolution};
pub use matrix::{Concatenated, DenseMatrix, FeatureMatrix, KroneckerIdentity, SparseMatrix};
pub use multi::{fit_multi_path, MultiFamily, MultiMode, MultiPathResult, MultiPenaltySpec};
