//! Timing grid over simulated group-lasso designs. Results are relative to
//! this implementation only.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{ensure, Context};
use clap::Args;
use groupnet::glm::{Binomial, GlmConfig};
use groupnet::simulate::simulate_group;
use groupnet::standardize::standardize;
use groupnet::{
    fit_glm_path, fit_path, FeatureMatrix, GroupedDesign, Groups, LambdaPolicy, PenaltyConfig, SolverConfig,
};

use crate::config::Mode;
use crate::io::{fmt_num, write_table};

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![100, 1000])]
    pub n_values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 0.95])]
    pub rho_values: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub groups: usize,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 100)]
    pub lambda_count: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda_ratio: f64,
    /// gaussian or binomial.
    #[arg(long, default_value = "gaussian")]
    pub family: String,
    #[arg(long, value_enum, default_value = "naive")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub groups: usize,
    pub rho: f64,
    pub times: Vec<f64>,
}

impl Cell {
    pub fn mean(&self) -> f64 {
        self.times.iter().sum::<f64>() / self.times.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.times.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn run_grid(a: &BenchArgs) -> anyhow::Result<Vec<Cell>> {
    ensure!(a.trials >= 1, "need at least one trial");
    ensure!(a.family == "gaussian" || a.family == "binomial", "bench supports gaussian and binomial");
    let mut cells = Vec::new();
    for &n in &a.n_values {
        for &rho in &a.rho_values {
            let d = simulate_group(n, a.groups, rho, 3.0, a.seed)?;
            let ones = vec![1.0; n];
            let (x, y, _) = standardize(&d.x, Some(&d.y_gaussian), &ones)?;
            let x: Arc<dyn FeatureMatrix> = Arc::new(x);
            let groups = Groups::uniform(3 * a.groups, 3)?;
            let penalty = PenaltyConfig {
                alpha: 1.0,
                omega: vec![3f64.sqrt(); a.groups],
                lambdas: LambdaPolicy::Geometric { count: a.lambda_count, ratio: Some(a.lambda_ratio) },
            };
            let inner = SolverConfig {
                mode: match a.mode {
                    Mode::Naive => groupnet::UpdateMode::Naive,
                    Mode::Cov => groupnet::UpdateMode::Covariance,
                },
                ..Default::default()
            };
            let mut times = Vec::with_capacity(a.trials);
            for _ in 0..a.trials {
                let t = Instant::now();
                if a.family == "gaussian" {
                    let design = GroupedDesign::new(x.clone(), groups.clone(), None, y.clone().unwrap_or_default())?;
                    fit_path(&design, &penalty, &inner)?;
                } else {
                    let fam = Binomial::new(d.y_binomial.clone(), None)?;
                    let cfg = GlmConfig { inner: inner.clone(), ..Default::default() };
                    fit_glm_path(x.clone(), &groups, &fam, &penalty, &cfg)?;
                }
                times.push(t.elapsed().as_secs_f64());
            }
            cells.push(Cell { n, groups: a.groups, rho, times });
        }
    }
    Ok(cells)
}

pub fn run(a: &BenchArgs) -> anyhow::Result<()> {
    let cells = run_grid(a)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let rows = cells.iter().map(|c| {
        vec![
            c.n.to_string(),
            c.groups.to_string(),
            fmt_num(c.rho),
            c.times.len().to_string(),
            fmt_num(c.mean()),
            fmt_num(c.min()),
        ]
    });
    let path = a.out.join("bench.csv");
    write_table(&path, &["n", "groups", "rho", "trials", "mean_seconds", "min_seconds"], rows)?;
    eprintln!("wrote {} (self-relative timings, no external comparison)", path.display());
    Ok(())
}
