mod bench;
mod config;
mod fit;
mod io;
mod kkt;
mod problem;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "groupnet", version, about = "Group elastic-net regularization paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file, JSON or `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

impl Common {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(self.run))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a regularization path and write its artifacts.
    Fit(Common),
    /// Simulate the cubic-expansion group design.
    SimulateGroup(sim::SimGroupArgs),
    /// Simulate the equi-correlated lasso design.
    SimulateLasso(sim::SimLassoArgs),
    /// Time path fits over an (n, rho) grid.
    Bench(bench::BenchArgs),
    /// Recompute optimality conditions for a fitted path.
    CheckKkt {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/coefficients.csv`.
        #[arg(long)]
        coefficients: Option<PathBuf>,
        /// Defaults to `<out>/summary.json`.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = fit::KKT_SLACK)]
        slack: f64,
        /// Also bound the stationarity residual of nonzero groups, relative to λ.
        #[arg(long)]
        stationarity_tol: Option<f64>,
    },
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    kind: &'a str,
    message: String,
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(g) = cause.downcast_ref::<groupnet::Error>() {
            return g.kind();
        }
        if let Some(c) = cause.downcast_ref::<io::CsvError>() {
            return c.kind();
        }
        if cause.downcast_ref::<fit::KktFailure>().is_some() {
            return "KktCheckFailed";
        }
    }
    "Error"
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GROUPLASSO_THREADS") {
        let n: usize =
            v.trim().parse().map_err(|_| anyhow::anyhow!("GROUPLASSO_THREADS must be a positive integer"))?;
        anyhow::ensure!(n > 0, "GROUPLASSO_THREADS must be a positive integer");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(command: Command, out: &mut Option<PathBuf>) -> anyhow::Result<bool> {
    configure_threads()?;
    match command {
        Command::Fit(common) => {
            let cfg = common.resolve()?;
            *out = Some(cfg.out_dir());
            let s = fit::run_fit(&cfg)?;
            println!("fitted {} lambdas, wrote {}", s.lambdas.len(), cfg.out_dir().display());
        }
        Command::SimulateGroup(a) => {
            *out = Some(a.out.clone());
            sim::run_group(&a)?;
        }
        Command::SimulateLasso(a) => {
            *out = Some(a.out.clone());
            sim::run_lasso(&a)?;
        }
        Command::Bench(a) => {
            *out = Some(a.out.clone());
            bench::run(&a)?;
        }
        Command::CheckKkt { common, coefficients, summary, slack, stationarity_tol } => {
            let cfg = common.resolve()?;
            let dir = cfg.out_dir();
            let coefficients = coefficients.unwrap_or_else(|| dir.join("coefficients.csv"));
            let summary = summary.unwrap_or_else(|| dir.join("summary.json"));
            let rows = fit::run_check(&cfg, &coefficients, &summary, slack, stationarity_tol)?;
            println!("lambda,max_score_ratio,max_stationarity,pass");
            for r in &rows {
                println!(
                    "{},{},{},{}",
                    io::fmt_num(r.lambda),
                    io::fmt_num(r.max_score_ratio),
                    io::fmt_num(r.max_stationarity),
                    r.pass
                );
            }
            return Ok(rows.iter().all(|r| r.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = None;
    match run(cli.command, &mut out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: KKT conditions violated");
            ExitCode::from(2)
        }
        Err(e) => {
            let record = ErrorRecord { kind: error_kind(&e), message: format!("{e:#}") };
            eprintln!("error: {}", record.message);
            if let Some(dir) = out {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = io::write_json(&dir.join("error.json"), &record);
                }
            }
            ExitCode::FAILURE
        }
    }
}
