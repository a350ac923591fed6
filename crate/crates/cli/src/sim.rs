use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use groupnet::simulate::{simulate_group, simulate_lasso, SimData};

use crate::io::{write_column, write_matrix};

#[derive(Debug, Clone, Args)]
pub struct SimGroupArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Number of base features; each expands to three columns.
    #[arg(long, default_value_t = 50)]
    pub groups: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "sim")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimLassoArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "sim")]
    pub out: PathBuf,
}

fn write_sim(out: &Path, d: &SimData, group_sizes: &[f64]) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_matrix(&out.join("x.csv"), &d.x)?;
    write_column(&out.join("y.csv"), "y", &d.y_gaussian)?;
    write_column(&out.join("y_binomial.csv"), "y", &d.y_binomial)?;
    write_column(&out.join("beta.csv"), "beta", &d.beta)?;
    write_column(&out.join("groups.csv"), "size", group_sizes)?;
    Ok(())
}

pub fn run_group(a: &SimGroupArgs) -> anyhow::Result<()> {
    let d = simulate_group(a.n, a.groups, a.rho, a.snr, a.seed)?;
    write_sim(&a.out, &d, &vec![3.0; a.groups])
}

pub fn run_lasso(a: &SimLassoArgs) -> anyhow::Result<()> {
    let d = simulate_lasso(a.n, a.p, a.rho, a.snr, a.seed)?;
    write_sim(&a.out, &d, &vec![1.0; a.p])
}
