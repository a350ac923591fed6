//! Turns a [`RunConfig`] into solver inputs and runs the matching path fit.

use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use groupnet::glm::GlmConfig;
use groupnet::standardize::{standardize, Standardization};
use groupnet::{
    family_by_name, fit_glm_path, fit_multi_path, fit_path, Diagnostics, FeatureMatrix, GroupedDesign, Groups,
    LambdaPolicy, MultiFamily, MultiMode, MultiPenaltySpec, PenaltyConfig, SolverConfig, UpdateMode,
};
use groupnet::{DenseMatrix, KroneckerIdentity};

use crate::config::{Mode, Multi, RunConfig};
use crate::io::load_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Gaussian,
    Binomial,
    Poisson,
    MultiGaussian,
    Multinomial,
}

impl FamilyKind {
    pub fn parse(name: &str) -> anyhow::Result<Self> {
        Ok(match name {
            "gaussian" => Self::Gaussian,
            "binomial" => Self::Binomial,
            "poisson" => Self::Poisson,
            "multigaussian" => Self::MultiGaussian,
            "multinomial" => Self::Multinomial,
            other => bail!("unknown family {other:?}"),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Binomial => "binomial",
            Self::Poisson => "poisson",
            Self::MultiGaussian => "multigaussian",
            Self::Multinomial => "multinomial",
        }
    }

    pub fn is_multi(self) -> bool {
        matches!(self, Self::MultiGaussian | Self::Multinomial)
    }
}

/// Everything a fit needs, on the (possibly standardized) fitting scale.
pub struct Problem {
    pub kind: FamilyKind,
    pub x: DenseMatrix,
    pub st: Option<Standardization>,
    /// Interleaved `n·c` response (standardized for the Gaussian family
    /// when requested).
    pub y: Vec<f64>,
    pub classes: usize,
    pub weights: Option<Vec<f64>>,
    /// Interleaved `n·c` offset.
    pub offset: Option<Vec<f64>>,
    /// Groups over the coefficient vector (`p`, or `p·c` class-fastest).
    pub groups: Groups,
    pub omega: Vec<f64>,
    pub alpha: f64,
    pub lambdas: LambdaPolicy,
    pub intercept: bool,
    pub multi: MultiMode,
    pub mode: UpdateMode,
    pub tol: f64,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Design acting on the coefficient vector, without the intercept.
    pub fn design_matrix(&self) -> anyhow::Result<Arc<dyn FeatureMatrix>> {
        let x: Arc<dyn FeatureMatrix> = Arc::new(self.x.clone());
        Ok(if self.kind.is_multi() { Arc::new(KroneckerIdentity::new(x, self.classes)?) } else { x })
    }

    /// Maps original-scale coefficients onto the fitting scale.
    pub fn to_fit_scale(&self, beta: &[f64], b0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let Some(st) = &self.st else {
            return (beta.to_vec(), b0.to_vec());
        };
        let c = self.classes;
        let mut b = beta.to_vec();
        let mut b0: Vec<f64> = b0.iter().map(|v| v - st.y_center).collect();
        for (k, v) in b.iter_mut().enumerate() {
            let j = k / c;
            b0[k % c] += *v * st.centers[j];
            *v *= st.scales[j] / st.y_scale;
        }
        b0.iter_mut().for_each(|v| *v /= st.y_scale);
        (b, b0)
    }

    /// Maps fitting-scale coefficients back to the original features.
    pub fn to_original_scale(&self, beta: &[f64], b0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let Some(st) = &self.st else {
            return (beta.to_vec(), b0.to_vec());
        };
        let c = self.classes;
        let mut b = beta.to_vec();
        let mut b0: Vec<f64> = b0.iter().map(|v| st.y_center + st.y_scale * v).collect();
        for (k, v) in b.iter_mut().enumerate() {
            let j = k / c;
            *v *= st.y_scale / st.scales[j];
            b0[k % c] -= *v * st.centers[j];
        }
        (b, b0)
    }
}

fn group_spec(spec: Option<&str>, p: usize) -> anyhow::Result<Groups> {
    let spec = spec.unwrap_or("singletons");
    if spec == "singletons" {
        return Ok(Groups::singletons(p)?);
    }
    if let Ok(size) = spec.parse::<usize>() {
        return Ok(Groups::uniform(p, size)?);
    }
    let t = load_csv(spec.as_ref())?;
    let sizes =
        t.values()
            .iter()
            .map(|v| {
                if *v >= 1.0 && v.fract() == 0.0 {
                    Ok(*v as usize)
                } else {
                    Err(anyhow::anyhow!("bad group size {v}"))
                }
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
    let g = Groups::from_sizes(&sizes)?;
    ensure!(g.total() == p, "group sizes sum to {}, matrix has {p} columns", g.total());
    Ok(g)
}

fn factors(spec: Option<&str>, groups: &Groups) -> anyhow::Result<Vec<f64>> {
    match spec.unwrap_or("uniform") {
        "uniform" => Ok(vec![1.0; groups.len()]),
        "sqrt" => Ok(groups.sizes().iter().map(|s| (*s as f64).sqrt()).collect()),
        path => {
            let v = load_csv(path.as_ref())?.values().to_vec();
            ensure!(v.len() == groups.len(), "{} penalty factors for {} groups", v.len(), groups.len());
            Ok(v)
        }
    }
}

/// Response as an interleaved `n·c` vector and the class count.
fn response(kind: FamilyKind, t: &crate::io::Table) -> anyhow::Result<(Vec<f64>, usize)> {
    match kind {
        FamilyKind::Multinomial if t.cols == 1 => {
            let labels = t.values();
            ensure!(
                labels.iter().all(|v| *v >= 0.0 && v.fract() == 0.0),
                "single-column multinomial responses must be class labels 0, 1, ..."
            );
            let c = labels.iter().fold(0.0f64, |a, b| a.max(*b)) as usize + 1;
            ensure!(c >= 2, "multinomial needs at least two classes");
            let mut y = vec![0.0; labels.len() * c];
            for (i, l) in labels.iter().enumerate() {
                y[i * c + *l as usize] = 1.0;
            }
            Ok((y, c))
        }
        k if k.is_multi() => Ok((t.data.clone(), t.cols)),
        _ => {
            ensure!(t.cols == 1, "{} family takes a single response column", kind.name());
            Ok((t.data.clone(), 1))
        }
    }
}

pub fn load_problem(cfg: &RunConfig) -> anyhow::Result<Problem> {
    let kind = FamilyKind::parse(cfg.family_name())?;
    let x_path = cfg.x.as_ref().context("missing --x")?;
    let y_path = cfg.y.as_ref().context("missing --y")?;
    let x = load_csv(x_path)?.to_matrix()?;
    let (y, classes) = response(kind, &load_csv(y_path)?)?;
    let n = x.nrows();
    ensure!(y.len() == n * classes, "response has {} rows, features have {n}", y.len() / classes);
    let weights = match &cfg.weights_file {
        Some(p) => {
            let w = load_csv(p)?.values().to_vec();
            ensure!(w.len() == n, "{} weights for {n} observations", w.len());
            Some(w)
        }
        None => None,
    };
    let offset = match &cfg.offset_file {
        Some(p) => {
            let o = load_csv(p)?.values().to_vec();
            ensure!(o.len() == n * classes, "offset has {} entries, expected {}", o.len(), n * classes);
            Some(o)
        }
        None => None,
    };
    // the Gaussian response is standardized along with the features
    let (x, y, offset, st) = if cfg.standardize.unwrap_or(false) {
        let ones = vec![1.0; n];
        let w = weights.as_deref().unwrap_or(&ones);
        if kind == FamilyKind::Gaussian {
            let (z, ys, st) = standardize(&x, Some(&y), w)?;
            let offset = offset.map(|o| o.iter().map(|v| v / st.y_scale).collect());
            (z, ys.unwrap_or(y), offset, Some(st))
        } else {
            let (z, _, st) = standardize(&x, None, w)?;
            (z, y, offset, Some(st))
        }
    } else {
        (x, y, offset, None)
    };
    let p = x.ncols();
    let multi = match cfg.multi.unwrap_or(Multi::Grouped) {
        Multi::Grouped => MultiMode::Grouped,
        Multi::Ungrouped => MultiMode::Ungrouped,
    };
    let groups = if kind.is_multi() {
        match multi {
            MultiMode::Grouped => Groups::uniform(p * classes, classes)?,
            MultiMode::Ungrouped => Groups::singletons(p * classes)?,
        }
    } else {
        group_spec(cfg.groups.as_deref(), p)?
    };
    let omega = factors(cfg.penalty_factors.as_deref(), &groups)?;
    let lambdas = match &cfg.lambda_file {
        Some(path) => LambdaPolicy::Explicit(load_csv(path)?.values().to_vec()),
        None => LambdaPolicy::Geometric { count: cfg.lambda_count.unwrap_or(100), ratio: cfg.lambda_ratio },
    };
    Ok(Problem {
        kind,
        x,
        st,
        y,
        classes,
        weights,
        offset,
        groups,
        omega,
        alpha: cfg.alpha.unwrap_or(1.0),
        lambdas,
        intercept: cfg.intercept.unwrap_or(true),
        multi,
        mode: match cfg.mode.unwrap_or(Mode::Naive) {
            Mode::Naive => UpdateMode::Naive,
            Mode::Cov => UpdateMode::Covariance,
        },
        tol: cfg.tol.unwrap_or(groupnet::gaussian::DEFAULT_TOL),
    })
}

/// Path on the fitting scale with dense coefficients.
pub struct Fitted {
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    pub intercepts: Vec<Vec<f64>>,
    pub diagnostics: Vec<Diagnostics>,
}

pub fn fit(pb: &Problem) -> anyhow::Result<Fitted> {
    let inner = SolverConfig { mode: pb.mode, tol: pb.tol, intercept: pb.intercept, ..Default::default() };
    let glm =
        GlmConfig { offset: pb.offset.clone(), intercept: pb.intercept, inner: inner.clone(), ..Default::default() };
    let x: Arc<dyn FeatureMatrix> = Arc::new(pb.x.clone());
    let ncoef = pb.groups.total();
    if pb.kind.is_multi() {
        let spec = MultiPenaltySpec {
            mode: pb.multi,
            alpha: pb.alpha,
            omega: Some(pb.omega.clone()),
            lambdas: pb.lambdas.clone(),
        };
        let family =
            if pb.kind == FamilyKind::Multinomial { MultiFamily::Multinomial } else { MultiFamily::MultiGaussian };
        let r = fit_multi_path(x, &pb.y, pb.weights.clone(), pb.classes, &spec, family, &glm)?;
        return Ok(Fitted {
            lambda_max: r.lambda_max,
            lambdas: r.lambdas,
            betas: r.coefs.iter().map(|b| b.to_dense(ncoef)).collect(),
            intercepts: r.intercepts,
            diagnostics: r.diagnostics,
        });
    }
    let penalty = PenaltyConfig { alpha: pb.alpha, omega: pb.omega.clone(), lambdas: pb.lambdas.clone() };
    let r = match pb.kind {
        FamilyKind::Gaussian => {
            let y = match &pb.offset {
                Some(o) => pb.y.iter().zip(o).map(|(a, b)| a - b).collect(),
                None => pb.y.clone(),
            };
            let design = GroupedDesign::new(x, pb.groups.clone(), pb.weights.clone(), y)?;
            fit_path(&design, &penalty, &inner)?
        }
        _ => {
            let family = family_by_name(pb.kind.name(), pb.y.clone(), pb.weights.clone(), 1)?;
            fit_glm_path(x, &pb.groups, family.as_ref(), &penalty, &glm)?
        }
    };
    Ok(Fitted {
        lambda_max: r.lambda_max,
        lambdas: r.lambdas,
        betas: r.betas.iter().map(|b| b.to_dense(ncoef)).collect(),
        intercepts: r.intercepts.iter().map(|b| vec![*b]).collect(),
        diagnostics: r.diagnostics,
    })
}
