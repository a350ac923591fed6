//! Run configuration shared by the `fit` and `check-kkt` subcommands.
//!
//! Every flag has a config-file twin under the same name (dashes or
//! underscores). Files are either a JSON object or `key = value` lines;
//! command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Naive,
    Cov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Multi {
    Grouped,
    Ungrouped,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Feature matrix CSV (rows are observations).
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Response CSV; several columns for multi-response families.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// gaussian, binomial, poisson, multigaussian or multinomial.
    #[arg(long)]
    pub family: Option<String>,
    /// Mix of group lasso (1) and ridge (0); default 1.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Path length; default 100.
    #[arg(long)]
    pub lambda_count: Option<usize>,
    /// Smallest λ as a fraction of λmax; default 0.01 if n < p, else 1e-4.
    #[arg(long)]
    pub lambda_ratio: Option<f64>,
    /// One λ per line, strictly decreasing.
    #[arg(long)]
    pub lambda_file: Option<PathBuf>,
    /// `singletons`, a uniform group size, or a file of group sizes.
    #[arg(long)]
    pub groups: Option<String>,
    /// `uniform`, `sqrt` (square root of the group size) or a file.
    #[arg(long)]
    pub penalty_factors: Option<String>,
    /// Center and scale columns (and the Gaussian response) before fitting.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Fixed linear-predictor offset, one value per row (per class entry for multi-response).
    #[arg(long)]
    pub offset_file: Option<PathBuf>,
    /// Nonnegative observation weights, one per row.
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
    /// Gaussian update bookkeeping; default naive.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Penalty structure for multi-response families; default grouped.
    #[arg(long, value_enum)]
    pub multi: Option<Multi>,
    /// Convergence threshold on the per-group change in prediction; default 1e-7.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Recorded in config.txt; fitting itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; default `groupnet-out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit an unpenalized intercept; default true.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub intercept: Option<bool>,
    /// Fail unless every λ passes the KKT check.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub check_kkt: Option<bool>,
    /// Also write per-group coefficient norms along the path.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub profile: Option<bool>,
}

/// Keys whose values stay strings in `key = value` files.
const STRING_KEYS: &[&str] = &[
    "x",
    "y",
    "family",
    "lambda_file",
    "groups",
    "penalty_factors",
    "offset_file",
    "weights_file",
    "mode",
    "multi",
    "out",
];

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        if text.trim_start().starts_with('{') {
            let mut v: Value = serde_json::from_str(text)?;
            if let Value::Object(m) = &mut v {
                *m = std::mem::take(m).into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect();
            }
            return Ok(serde_json::from_value(v)?);
        }
        let mut map = Map::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected key = value", n + 1);
            };
            let key = k.trim().replace('-', "_");
            let raw = v.trim();
            let value = if STRING_KEYS.contains(&key.as_str()) {
                Value::String(raw.to_string())
            } else {
                serde_json::from_str(raw).with_context(|| format!("line {}: bad value for {key}", n + 1))?
            };
            map.insert(key, value);
        }
        Ok(serde_json::from_value(Value::Object(map))?)
    }

    pub fn to_key_value(&self) -> String {
        let Ok(Value::Object(m)) = serde_json::to_value(self) else {
            return String::new();
        };
        let mut out = String::new();
        for (k, v) in m {
            match v {
                Value::Null => {}
                Value::String(s) => out.push_str(&format!("{k} = {s}\n")),
                other => out.push_str(&format!("{k} = {other}\n")),
            }
        }
        out
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            x: flags.x.or(self.x),
            y: flags.y.or(self.y),
            family: flags.family.or(self.family),
            alpha: flags.alpha.or(self.alpha),
            lambda_count: flags.lambda_count.or(self.lambda_count),
            lambda_ratio: flags.lambda_ratio.or(self.lambda_ratio),
            lambda_file: flags.lambda_file.or(self.lambda_file),
            groups: flags.groups.or(self.groups),
            penalty_factors: flags.penalty_factors.or(self.penalty_factors),
            standardize: flags.standardize.or(self.standardize),
            offset_file: flags.offset_file.or(self.offset_file),
            weights_file: flags.weights_file.or(self.weights_file),
            mode: flags.mode.or(self.mode),
            multi: flags.multi.or(self.multi),
            tol: flags.tol.or(self.tol),
            seed: flags.seed.or(self.seed),
            out: flags.out.or(self.out),
            intercept: flags.intercept.or(self.intercept),
            check_kkt: flags.check_kkt.or(self.check_kkt),
            profile: flags.profile.or(self.profile),
        }
    }

    pub fn family_name(&self) -> &str {
        self.family.as_deref().unwrap_or("gaussian")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("groupnet-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            x: Some("data/x.csv".into()),
            y: Some("data/y.csv".into()),
            family: Some("binomial".into()),
            alpha: Some(0.5),
            lambda_count: Some(20),
            groups: Some("3".into()),
            penalty_factors: Some("sqrt".into()),
            standardize: Some(true),
            mode: Some(Mode::Cov),
            multi: Some(Multi::Ungrouped),
            tol: Some(1e-9),
            seed: Some(42),
            check_kkt: Some(false),
            ..Default::default()
        }
    }

    #[test]
    fn key_value_round_trip() {
        let c = sample();
        let text = c.to_key_value();
        assert!(text.contains("groups = 3\n") && text.contains("mode = cov\n"));
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn json_round_trip_and_dashed_keys() {
        let c = sample();
        assert_eq!(RunConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap(), c);
        let d = RunConfig::parse(r#"{"lambda-count": 7, "family": "poisson"}"#).unwrap();
        assert_eq!((d.lambda_count, d.family.as_deref()), (Some(7), Some("poisson")));
        let e = RunConfig::parse("# comment\nlambda-ratio = 0.05\nstandardize = false\n").unwrap();
        assert_eq!((e.lambda_ratio, e.standardize), (Some(0.05), Some(false)));
    }

    #[test]
    fn flags_win() {
        let file = sample();
        let flags = RunConfig { alpha: Some(0.9), out: Some("o".into()), ..Default::default() };
        let m = file.clone().overlay(flags);
        assert_eq!((m.alpha, m.out.clone(), m.family.clone()), (Some(0.9), Some("o".into()), file.family));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(RunConfig::parse("bogus = 1\n").is_err());
        assert!(RunConfig::parse("alpha 0.5\n").is_err());
        assert!(RunConfig::parse("alpha = abc\n").is_err());
    }
}
