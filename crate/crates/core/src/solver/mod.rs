//! Synthesis-form Lasso for a single margin and the per-margin ANOVA estimator.
//!
//! For data `Y` on a d-dimensional grid the margin estimator solves
//!
//! ```text
//! beta = argmin_b ||Y_perp - sum_j b_j phi~_j||^2 / n + 2 lambda ||b||_1
//! ```
//!
//! over the reduced index set `prod_i [k+1 : n_i]`, where `Y_perp` is the
//! projection of `Y` onto the complement of the null space of `D^k`. The fitted
//! tensor `f = sum_j beta_j phi~_j` satisfies `D^k f = beta`.

mod active_set;
mod apg;
mod cd;
mod lambda;
mod margins;
pub(crate) mod qr;

use serde::{Deserialize, Serialize};

use crate::dictionary::ProductDictionary;
use crate::diff::total_diff;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use lambda::{lambda0, universal_lambda};
pub use margins::{fit_all_margins, AnovaFit, AnovaFitConfig, LambdaRule, MarginFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Sign-constrained active-set method with exact QR subproblem solves.
    #[default]
    ActiveSet,
    /// Accelerated proximal gradient with adaptive restart.
    AcceleratedProximalGradient,
    /// Cyclic coordinate descent.
    CoordinateDescent,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active-set" => Ok(Self::ActiveSet),
            "accelerated-proximal-gradient" | "apg" | "fista" => Ok(Self::AcceleratedProximalGradient),
            "coordinate-descent" | "cd" => Ok(Self::CoordinateDescent),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub lambda: f64,
    pub solver: SolverKind,
    /// Iteration cap; `None` uses the solver default.
    pub max_iter: Option<usize>,
    /// KKT tolerance; `None` uses `1e-8 (1 + ||Y||^2 / n)`.
    pub tol: Option<f64>,
    /// Coefficients on the reduced shape used to initialize the solver.
    pub warm_start: Option<Tensor>,
}

impl FitConfig {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, solver: SolverKind::default(), max_iter: None, tol: None, warm_start: None }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub fn with_warm_start(mut self, beta: Tensor) -> Self {
        self.warm_start = Some(beta);
        self
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// `beta = D^k f` on the reduced shape.
    pub coefficients: Tensor,
    /// `f = sum_j beta_j phi~_j` on the full shape.
    pub fitted: Tensor,
    pub lambda: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each outer iteration.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn support_size(&self) -> usize {
        self.coefficients.data().iter().filter(|b| **b != 0.0).count()
    }
}

/// Problem data shared by the solvers.
pub(crate) struct Problem {
    pub dict: ProductDictionary,
    pub y: Tensor,
    pub n: f64,
    pub lambda: f64,
}

impl Problem {
    pub fn new(y: &Tensor, k: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Invalid(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        if y.ndim() == 0 {
            return Err(Error::Shape("margin fit needs a tensor of order at least 1".into()));
        }
        if y.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("data contains non-finite values".into()));
        }
        let dict = ProductDictionary::new(y.shape(), k)?;
        let yp = dict.project(y)?;
        Ok(Self { n: y.len() as f64, dict, y: yp, lambda })
    }

    /// Gradient of the smooth part, `(2/n) X^T (X beta - y)`.
    pub fn gradient(&self, beta: &Tensor) -> Result<Tensor> {
        let mut r = self.dict.synthesize(beta)?;
        r.axpy(-1.0, &self.y)?;
        let mut g = self.dict.analyze(&r)?;
        g.scale(2.0 / self.n);
        Ok(g)
    }

    pub fn objective(&self, beta: &Tensor) -> Result<f64> {
        let fit = self.dict.synthesize(beta)?;
        Ok(fit.sub(&self.y)?.frobenius_sq() / self.n + 2.0 * self.lambda * beta.l1_norm())
    }

    pub fn kkt(&self, beta: &Tensor) -> Result<f64> {
        Ok(kkt_from_gradient(&self.gradient(beta)?, beta, self.lambda))
    }

    pub fn finish(&self, beta: Tensor, iterations: usize, tol: f64, trace: Vec<f64>) -> Result<FitResult> {
        let fitted = self.dict.synthesize(&beta)?;
        let objective = fitted.sub(&self.y)?.frobenius_sq() / self.n + 2.0 * self.lambda * beta.l1_norm();
        let kkt_residual = self.kkt(&beta)?;
        let converged = kkt_residual <= tol;
        Ok(FitResult {
            coefficients: beta,
            fitted,
            lambda: self.lambda,
            objective,
            kkt_residual,
            tol,
            iterations,
            converged,
            trace,
        })
    }
}

fn kkt_from_gradient(g: &Tensor, beta: &Tensor, lambda: f64) -> f64 {
    g.data()
        .iter()
        .zip(beta.data())
        .map(|(&gj, &bj)| {
            if bj != 0.0 {
                (gj + 2.0 * lambda * bj.signum()).abs()
            } else {
                (gj.abs() - 2.0 * lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Default KKT tolerance `1e-8 (1 + ||Y||^2 / n)`.
pub fn default_tol(y: &Tensor) -> f64 {
    1e-8 * (1.0 + y.mean_sq())
}

/// Smallest `lambda` for which the zero coefficient vector is optimal.
pub fn lambda_max(y: &Tensor, k: usize) -> Result<f64> {
    let p = Problem::new(y, k, 0.0)?;
    Ok(p.dict.analyze(&p.y)?.max_abs() / p.n)
}

/// Maximal violation of the optimality conditions at `beta`.
pub fn kkt_residual(y: &Tensor, k: usize, lambda: f64, beta: &Tensor) -> Result<f64> {
    Problem::new(y, k, lambda)?.kkt(beta)
}

/// Objective value at `beta`.
pub fn objective(y: &Tensor, k: usize, lambda: f64, beta: &Tensor) -> Result<f64> {
    Problem::new(y, k, lambda)?.objective(beta)
}

/// Fits the full margin `M = [d]` of `y`.
pub fn fit_margin(y: &Tensor, k: usize, config: &FitConfig) -> Result<FitResult> {
    let problem = Problem::new(y, k, config.lambda)?;
    let tol = config.tol.unwrap_or_else(|| default_tol(y));
    let reduced = problem.dict.reduced_shape();
    let warm = match &config.warm_start {
        Some(w) if w.shape() != reduced.as_slice() => {
            return Err(Error::Shape(format!(
                "warm start has shape {:?}, expected {reduced:?}",
                w.shape()
            )))
        }
        Some(w) => w.clone(),
        None => Tensor::zeros(&reduced)?,
    };
    let result = if config.lambda == 0.0 {
        let beta = total_diff(&problem.y, k)?;
        problem.finish(beta, 0, tol, Vec::new())?
    } else if config.lambda >= problem.dict.analyze(&problem.y)?.max_abs() / problem.n {
        problem.finish(Tensor::zeros(&reduced)?, 0, tol, Vec::new())?
    } else {
        match config.solver {
            SolverKind::ActiveSet => active_set::solve(&problem, warm, tol, config.max_iter.unwrap_or(1000))?,
            SolverKind::AcceleratedProximalGradient => {
                apg::solve(&problem, warm, tol, config.max_iter.unwrap_or(100_000))?
            }
            SolverKind::CoordinateDescent => cd::solve(&problem, warm, tol, config.max_iter.unwrap_or(10_000))?,
        }
    };
    if result.converged {
        Ok(result)
    } else {
        Err(Error::Convergence {
            iterations: result.iterations,
            kkt_residual: result.kkt_residual,
            partial: Box::new(result),
        })
    }
}

/// Fits a descending sequence of `lambda` values with warm starts.
pub fn fit_path(y: &Tensor, k: usize, lambdas: &[f64], base: &FitConfig) -> Result<Vec<FitResult>> {
    let mut out: Vec<FitResult> = Vec::with_capacity(lambdas.len());
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted != lambdas {
        return Err(Error::Invalid("lambda path must be sorted in descending order".into()));
    }
    for &lambda in lambdas {
        let mut cfg = base.clone();
        cfg.lambda = lambda;
        if let Some(prev) = out.last() {
            cfg.warm_start = Some(prev.coefficients.clone());
        }
        out.push(fit_margin(y, k, &cfg)?);
    }
    Ok(out)
}
