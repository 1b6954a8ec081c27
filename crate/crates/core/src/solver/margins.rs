//! Whole-tensor estimator: one synthesis Lasso per ANOVA margin.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_margin, FitConfig, FitResult, SolverKind};
use crate::anova::{all_margin_keys, contract_margin, margin_expand, project_margin, MarginKey};
use crate::diff::{margin_prefactor, MarginNormalization};
use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum LambdaRule {
    /// The same `lambda` on every margin.
    Fixed { lambda: f64 },
    /// Explicit per-margin values; margins not listed use `default`.
    PerMargin { values: BTreeMap<String, f64>, default: f64 },
    /// `scale * sigma_M sqrt(4 log(2 n_M) / n_M)` with `sigma_M^2 = sigma^2 n_M / n`,
    /// the universal level of the flattened margin problem.
    Universal { sigma: f64, scale: f64 },
}

impl LambdaRule {
    pub fn lambda_for(&self, shape: &[usize], key: &MarginKey) -> f64 {
        match self {
            LambdaRule::Fixed { lambda } => *lambda,
            LambdaRule::PerMargin { values, default } => *values.get(&key.to_string()).unwrap_or(default),
            LambdaRule::Universal { sigma, scale } => {
                let n = numel(shape) as f64;
                let n_m: f64 = key.axes.iter().map(|&a| shape[a] as f64).product();
                scale * sigma * (4.0 * (2.0 * n_m).ln() / n).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnovaFitConfig {
    pub k: usize,
    pub lambda: LambdaRule,
    pub normalization: MarginNormalization,
    pub solver: SolverKind,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl AnovaFitConfig {
    pub fn new(k: usize, lambda: LambdaRule) -> Self {
        Self {
            k,
            lambda,
            normalization: MarginNormalization::default(),
            solver: SolverKind::default(),
            tol: None,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarginFit {
    pub key: MarginKey,
    /// Penalty level before the margin prefactor is applied.
    pub lambda: f64,
    /// Fit of the flattened margin; `None` for `M = {}` (least squares).
    pub fit: Option<FitResult>,
    /// The fitted component on the full shape.
    pub component: Tensor,
}

#[derive(Debug, Clone)]
pub struct AnovaFit {
    pub margins: Vec<MarginFit>,
    pub fitted: Tensor,
}

impl AnovaFit {
    pub fn margin(&self, key: &MarginKey) -> Option<&MarginFit> {
        self.margins.iter().find(|m| &m.key == key)
    }
}

fn fit_one(y: &Tensor, cfg: &AnovaFitConfig, key: MarginKey) -> Result<MarginFit> {
    let shape = y.shape();
    let lambda = cfg.lambda.lambda_for(shape, &key);
    if key.axes.is_empty() {
        let component = project_margin(y, cfg.k, &key)?;
        return Ok(MarginFit { key, lambda, fit: None, component });
    }
    let bar = contract_margin(y, cfg.k, &key)?;
    let factor = margin_prefactor(shape, cfg.k, &key.axes, cfg.normalization);
    let mut fc = FitConfig::new(lambda * factor).with_solver(cfg.solver);
    fc.tol = cfg.tol;
    fc.max_iter = cfg.max_iter;
    let fit = fit_margin(&bar, cfg.k, &fc)?;
    let component = margin_expand(&fit.fitted, shape, cfg.k, &key)?;
    Ok(MarginFit { key, lambda, fit: Some(fit), component })
}

/// Fits every margin `M(M, h)` of `y` and sums the fitted components.
///
/// Margins are fitted concurrently; the result does not depend on scheduling.
pub fn fit_all_margins(y: &Tensor, cfg: &AnovaFitConfig) -> Result<AnovaFit> {
    if y.ndim() == 0 {
        return Err(Error::Shape("whole-tensor fit needs a tensor of order at least 1".into()));
    }
    let keys = all_margin_keys(y.ndim(), cfg.k);
    let margins: Vec<MarginFit> = keys
        .into_par_iter()
        .map(|key| fit_one(y, cfg, key))
        .collect::<Result<_>>()?;
    let mut fitted = Tensor::zeros(y.shape())?;
    for m in &margins {
        fitted.add_assign(&m.component)?;
    }
    Ok(AnovaFit { margins, fitted })
}
