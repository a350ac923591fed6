use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{fmt_num, write_json, write_table};
use crate::kkt;
use crate::problem::{fit, load_problem, Problem};

pub const KKT_SLACK: f64 = 1e-4;

/// Deterministic run summary; wall-clock numbers live in `timings.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub family: String,
    pub n: usize,
    pub p: usize,
    pub classes: usize,
    pub alpha: f64,
    pub standardized: bool,
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    /// Original-scale intercepts, one per class.
    pub intercepts: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    pub kkt_max_residual: Vec<f64>,
    pub cycles: Vec<usize>,
    pub irls_iters: Vec<usize>,
    pub kkt_rounds: Vec<usize>,
    pub active_groups: Vec<usize>,
    pub nonzero: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub load_seconds: f64,
    pub fit_seconds: f64,
    pub write_seconds: f64,
}

/// Raised by `--check-kkt` when some λ fails certification.
#[derive(Debug)]
pub struct KktFailure {
    pub lambda: f64,
    pub residual: f64,
}

impl std::fmt::Display for KktFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KKT check failed at lambda {}: scaled score {}", self.lambda, self.residual)
    }
}

impl std::error::Error for KktFailure {}

/// Group label of a coefficient index in the output files.
fn group_label(pb: &Problem, k: usize) -> usize {
    pb.groups.group_of(k).unwrap_or(usize::MAX)
}

pub fn run_fit(cfg: &RunConfig) -> anyhow::Result<Summary> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.txt"), cfg.to_key_value()).context("writing config.txt")?;
    let t0 = Instant::now();
    let pb = load_problem(cfg)?;
    let t1 = Instant::now();
    let f = fit(&pb)?;
    let t2 = Instant::now();

    let c = pb.classes;
    let orig: Vec<(Vec<f64>, Vec<f64>)> =
        f.betas.iter().zip(&f.intercepts).map(|(b, b0)| pb.to_original_scale(b, b0)).collect();

    let mut rows = Vec::new();
    for (lam, (b, b0)) in f.lambdas.iter().zip(&orig) {
        if pb.intercept {
            for (l, v) in b0.iter().enumerate() {
                rows.push(vec![fmt_num(*lam), "-1".into(), l.to_string(), fmt_num(*v)]);
            }
        }
        for (k, v) in b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            rows.push(vec![fmt_num(*lam), group_label(&pb, k).to_string(), k.to_string(), fmt_num(*v)]);
        }
    }
    write_table(&out.join("coefficients.csv"), &["lambda", "group", "column", "value"], rows)?;

    if cfg.profile.unwrap_or(false) {
        write_profile(&out.join("profile.csv"), &pb, &f.lambdas, &orig)?;
    }

    let d = &f.diagnostics;
    let summary = Summary {
        family: pb.kind.name().into(),
        n: pb.n(),
        p: pb.p(),
        classes: c,
        alpha: pb.alpha,
        standardized: pb.st.is_some(),
        lambda_max: f.lambda_max,
        lambdas: f.lambdas.clone(),
        intercepts: orig.iter().map(|(_, b0)| b0.clone()).collect(),
        objective: d.iter().map(|x| x.objective).collect(),
        kkt_max_residual: d.iter().map(|x| x.kkt_max_residual).collect(),
        cycles: d.iter().map(|x| x.cycles).collect(),
        irls_iters: d.iter().map(|x| x.irls_iters).collect(),
        kkt_rounds: d.iter().map(|x| x.kkt_rounds).collect(),
        active_groups: d.iter().map(|x| x.active_size).collect(),
        nonzero: f.betas.iter().map(|b| b.iter().filter(|v| **v != 0.0).count()).collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    let t3 = Instant::now();
    write_json(
        &out.join("timings.json"),
        &Timings {
            load_seconds: (t1 - t0).as_secs_f64(),
            fit_seconds: (t2 - t1).as_secs_f64(),
            write_seconds: (t3 - t2).as_secs_f64(),
        },
    )?;

    if cfg.check_kkt.unwrap_or(false) {
        for (lam, r) in summary.lambdas.iter().zip(&summary.kkt_max_residual) {
            if *r > lam * (1.0 + KKT_SLACK) {
                return Err(KktFailure { lambda: *lam, residual: *r }.into());
            }
        }
    }
    Ok(summary)
}

/// Per-group `‖β_g‖₂` (original scale) against `log λ`.
fn write_profile(path: &Path, pb: &Problem, lambdas: &[f64], orig: &[(Vec<f64>, Vec<f64>)]) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for (lam, (b, _)) in lambdas.iter().zip(orig) {
        for g in 0..pb.groups.len() {
            let nrm = b[pb.groups.range(g)].iter().map(|v| v * v).sum::<f64>().sqrt();
            rows.push(vec![fmt_num(*lam), fmt_num(lam.ln()), g.to_string(), fmt_num(nrm)]);
        }
    }
    write_table(path, &["lambda", "log_lambda", "group", "norm"], rows)
}

/// Recomputes optimality conditions for a written path.
pub fn run_check(
    cfg: &RunConfig,
    coefficients: &Path,
    summary: &Path,
    slack: f64,
    stat_tol: Option<f64>,
) -> anyhow::Result<Vec<kkt::KktRow>> {
    let pb = load_problem(cfg)?;
    let text = fs::read_to_string(summary).with_context(|| format!("reading {}", summary.display()))?;
    let s: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", summary.display()))?;
    let (betas, b0) = kkt::read_path(coefficients, &s.lambdas, pb.groups.total(), pb.classes)?;
    kkt::check_path(&pb, &s.lambdas, &betas, &b0, slack, stat_tol)
}
