//! Monte Carlo rate experiments: replicate fits per grid size, aggregation and
//! log-log slope fits.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anova::{all_margin_keys, project_margin, MarginKey};
use crate::certify::{fit_loglog, SlopeFit};
use crate::dictionary::ProductDictionary;
use crate::error::{Error, Result};
use crate::grid::harmonic;
use crate::harness::config::{ErrorMode, ExperimentConfig, LambdaChoice};
use crate::harness::signal::generate_signal;
use crate::solver::{fit_all_margins, fit_margin, universal_lambda, AnovaFitConfig, FitConfig, LambdaRule};
use crate::tensor::Tensor;

/// One CSV row: `n, replicate, mse, lambda, converged, seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    /// Per-axis extent.
    pub n: usize,
    pub replicate: usize,
    /// `NaN` when the solver did not converge.
    pub mse: f64,
    pub lambda: f64,
    pub converged: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    /// Number of tensor entries `n^d`.
    pub size: usize,
    pub mean_mse: f64,
    pub std_error: f64,
    pub converged: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub points: Vec<RatePoint>,
    /// Fit of `ln mean_mse` against `ln size` over the whole schedule.
    pub fit_full: Option<SlopeFit>,
    /// The same fit over the largest half of the schedule (at least two sizes).
    pub fit_half: Option<SlopeFit>,
    pub records: Vec<ReplicateRecord>,
    /// Present when the grid-scaled constant was calibrated.
    pub calibration: Option<Calibration>,
}

impl RateResult {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn failures(&self) -> usize {
        self.points.iter().map(|p| p.failures).sum()
    }
}

/// Sum by recursive halving; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Seed of replicate `r` at schedule position `step`, drawn from stream `step`
/// of the ChaCha generator keyed by `seed`.
pub fn replicate_seed(seed: u64, step: usize, r: usize) -> u64 {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    g.set_stream(step as u64);
    g.set_word_pos(2 * r as u128);
    g.next_u64()
}

/// `scale * sigma * n^{-(H+2k-1)/(2H+2k-1)} (log n)^{H/(2H+2k-1)}` with `H = H(d)`
/// the harmonic number; `n^{-2/3} (log n)^{1/3}` for `d = k = 1`.
pub fn grid_scaled_lambda(sigma: f64, n: usize, d: usize, k: usize, scale: f64) -> f64 {
    let h = harmonic(d);
    let m = (2 * k - 1) as f64;
    let n = n as f64;
    scale * sigma * n.powf(-(h + m) / (2.0 * h + m)) * n.ln().powf(h / (2.0 * h + m))
}

struct Outcome {
    mse: f64,
    lambda: f64,
}

fn noisy(f0: &Tensor, sigma: f64, seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = f0.clone();
    for v in y.data_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    Ok(y)
}

fn fit_replicate(cfg: &ExperimentConfig, target: &Tensor, y: &Tensor) -> Result<Outcome> {
    let n = y.len();
    let mse = |fitted: &Tensor| -> Result<f64> { Ok(fitted.sub(target)?.frobenius_sq() / n as f64) };
    match cfg.mode {
        ErrorMode::Anova => {
            let LambdaChoice::Universal { scale } = cfg.lambda else {
                return Err(Error::Config("ANOVA mode supports the universal lambda rule only".into()));
            };
            let mut ac = AnovaFitConfig::new(cfg.k, LambdaRule::Universal { sigma: cfg.sigma, scale });
            ac.solver = cfg.solver;
            let fit = fit_all_margins(y, &ac)?;
            let lambda = fit.margin(&MarginKey::full(cfg.d)).map_or(f64::NAN, |m| m.lambda);
            Ok(Outcome { mse: mse(&fit.fitted)?, lambda })
        }
        ErrorMode::L0 => {
            let one = |lambda: f64| -> Result<Outcome> {
                let fit = fit_margin(y, cfg.k, &FitConfig::new(lambda).with_solver(cfg.solver))?;
                Ok(Outcome { mse: mse(&fit.fitted)?, lambda })
            };
            let base = universal_lambda(cfg.sigma, n);
            match &cfg.lambda {
                LambdaChoice::Universal { scale } => one(scale * base),
                LambdaChoice::GridScaled { scale } => one(grid_scaled_lambda(cfg.sigma, n, cfg.d, cfg.k, *scale)),
                LambdaChoice::GridCalibrated { .. } => {
                    Err(Error::Config("a calibrated constant must be resolved before fitting".into()))
                }
                LambdaChoice::Sweep { factors } => {
                    let mut best: Option<Outcome> = None;
                    for &f in factors {
                        let o = one(f * base)?;
                        if best.as_ref().is_none_or(|b| o.mse < b.mse) {
                            best = Some(o);
                        }
                    }
                    best.ok_or_else(|| Error::Config("empty lambda sweep".into()))
                }
            }
        }
    }
}

fn half_fit(points: &[RatePoint]) -> Option<SlopeFit> {
    let usable: Vec<&RatePoint> = points.iter().filter(|p| p.mean_mse > 0.0 && p.mean_mse.is_finite()).collect();
    if usable.len() < 2 {
        return None;
    }
    let take = usable.len().div_ceil(2).max(2);
    let tail = &usable[usable.len() - take..];
    let xs: Vec<f64> = tail.iter().map(|p| p.size as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.mean_mse).collect();
    fit_loglog(&xs, &ys).ok()
}

fn full_fit(points: &[RatePoint]) -> Option<SlopeFit> {
    let usable: Vec<&RatePoint> = points.iter().filter(|p| p.mean_mse > 0.0 && p.mean_mse.is_finite()).collect();
    let xs: Vec<f64> = usable.iter().map(|p| p.size as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.mean_mse).collect();
    fit_loglog(&xs, &ys).ok()
}

/// Runs every replicate of every grid size. Replicates run concurrently; each
/// draws its noise from its own seeded generator, so the result does not
/// depend on scheduling. A replicate whose solver fails to converge is kept
/// with `converged = false` and excluded from the means.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateResult> {
    cfg.validate()?;
    let (cfg, calibration) = match &cfg.lambda {
        LambdaChoice::GridCalibrated { candidates, replicates } => {
            let cal = calibrate_grid_scale(cfg, candidates, *replicates)?;
            (ExperimentConfig { lambda: LambdaChoice::GridScaled { scale: cal.scale }, ..cfg.clone() }, Some(cal))
        }
        _ => (cfg.clone(), None),
    };
    let mut points = Vec::with_capacity(cfg.n.len());
    let mut records = Vec::with_capacity(cfg.n.len() * cfg.replicates);
    for (step, &n) in cfg.n.iter().enumerate() {
        let (point, rows) = run_size(&cfg, step, n, cfg.seed, cfg.replicates)?;
        points.push(point);
        records.extend(rows);
    }
    Ok(RateResult { fit_full: full_fit(&points), fit_half: half_fit(&points), points, records, calibration })
}

fn run_size(cfg: &ExperimentConfig, step: usize, n: usize, seed: u64, replicates: usize) -> Result<(RatePoint, Vec<ReplicateRecord>)> {
    let shape = vec![n; cfg.d];
    let f0 = generate_signal(&cfg.signal, &shape, cfg.k)?.tensor;
    let target = match cfg.mode {
        ErrorMode::L0 => ProductDictionary::new(&shape, cfg.k)?.project(&f0)?,
        ErrorMode::Anova => f0.clone(),
    };
    let rows: Vec<ReplicateRecord> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(seed, step, r);
            let y = noisy(&f0, cfg.sigma, seed)?;
            match fit_replicate(cfg, &target, &y) {
                Ok(o) => Ok(ReplicateRecord { n, replicate: r, mse: o.mse, lambda: o.lambda, converged: true, seed }),
                Err(Error::Convergence { partial, .. }) => Ok(ReplicateRecord {
                    n,
                    replicate: r,
                    mse: f64::NAN,
                    lambda: partial.lambda,
                    converged: false,
                    seed,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let ok: Vec<f64> = rows.iter().filter(|r| r.converged).map(|r| r.mse).collect();
    let m = ok.len();
    let mean = if m > 0 { pairwise_sum(&ok) / m as f64 } else { f64::NAN };
    let std_error = if m > 1 {
        let dev: Vec<f64> = ok.iter().map(|x| (x - mean).powi(2)).collect();
        (pairwise_sum(&dev) / (m - 1) as f64 / m as f64).sqrt()
    } else {
        0.0
    };
    let point = RatePoint { n, size: shape.iter().product(), mean_mse: mean, std_error, converged: m, failures: rows.len() - m };
    Ok((point, rows))
}

/// Generator key of the calibration replicates, disjoint from the experiment's key `seed`.
pub fn calibration_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_CA1B_0000_0001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// The candidate with the smallest mean MSE.
    pub scale: f64,
    /// `(candidate, mean MSE)` at the smallest grid size.
    pub table: Vec<(f64, f64)>,
}

/// Chooses the grid-scaled constant once: every candidate is scored by its mean
/// MSE at the smallest size of the schedule, on `replicates` noise draws keyed by
/// [`calibration_seed`]. The winner is then held fixed across all sizes.
pub fn calibrate_grid_scale(cfg: &ExperimentConfig, candidates: &[f64], replicates: usize) -> Result<Calibration> {
    if candidates.is_empty() || replicates == 0 {
        return Err(Error::Config("calibration needs candidates and at least one replicate".into()));
    }
    let n = *cfg.n.first().ok_or_else(|| Error::Config("empty n schedule".into()))?;
    let mut table = Vec::with_capacity(candidates.len());
    for &scale in candidates {
        let c = ExperimentConfig { lambda: LambdaChoice::GridScaled { scale }, ..cfg.clone() };
        let (point, _) = run_size(&c, 0, n, calibration_seed(cfg.seed), replicates)?;
        table.push((scale, point.mean_mse));
    }
    let scale = table
        .iter()
        .filter(|(_, m)| m.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|t| t.0)
        .ok_or_else(|| Error::Numerical("no calibration candidate converged".into()))?;
    Ok(Calibration { scale, table })
}

/// Squared norm of each ANOVA component of `f^ - f0`, divided by `n`. The
/// contributions sum to the whole-tensor MSE.
pub fn anova_mse_contributions(fitted: &Tensor, f0: &Tensor, k: usize) -> Result<Vec<(MarginKey, f64)>> {
    let err = fitted.sub(f0)?;
    let n = err.len() as f64;
    all_margin_keys(err.ndim(), k)
        .into_iter()
        .map(|key| Ok((key.clone(), project_margin(&err, k, &key)?.frobenius_sq() / n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::signal::SignalSpec;
    use crate::solver::SolverKind;

    fn cfg(n: Vec<usize>, replicates: usize, sigma: f64) -> ExperimentConfig {
        ExperimentConfig {
            d: 1,
            k: 1,
            n,
            sigma,
            replicates,
            lambda: LambdaChoice::Universal { scale: 1.0 },
            signal: SignalSpec::Jumps { s0: 2, amplitude: 1.0 },
            seed: 11,
            mode: ErrorMode::L0,
            solver: SolverKind::ActiveSet,
        }
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn grid_scaled_one_dimensional() {
        let n = 1000usize;
        let want = 0.5 * (n as f64).powf(-2.0 / 3.0) * (n as f64).ln().cbrt();
        assert!((grid_scaled_lambda(0.5, n, 1, 1, 1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = replicate_seed(3, 0, 0);
        assert_eq!(a, replicate_seed(3, 0, 0));
        assert_ne!(a, replicate_seed(3, 0, 1));
        assert_ne!(a, replicate_seed(3, 1, 0));
        assert_ne!(a, replicate_seed(4, 0, 0));
    }

    #[test]
    fn single_size_single_replicate() {
        let r = run_rate_experiment(&cfg(vec![64], 1, 0.5)).unwrap();
        assert_eq!(r.records.len(), 1);
        assert!(r.fit_full.is_none() && r.fit_half.is_none());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("n,replicate,mse,lambda,converged,seed"));
    }

    #[test]
    fn noiseless_unpenalized_fit_is_exact() {
        let f0 = generate_signal(&SignalSpec::Jumps { s0: 2, amplitude: 1.0 }, &[40], 1).unwrap().tensor;
        let target = ProductDictionary::new(&[40], 1).unwrap().project(&f0).unwrap();
        let fit = fit_margin(&f0, 1, &FitConfig::new(0.0)).unwrap();
        assert!(fit.fitted.sub(&target).unwrap().frobenius_sq() / 40.0 < 1e-20);
    }

    #[test]
    fn deterministic_output() {
        let c = cfg(vec![32, 64], 4, 0.5);
        let a = run_rate_experiment(&c).unwrap();
        let b = run_rate_experiment(&c).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn anova_contributions_sum() {
        let f0 = generate_signal(&SignalSpec::Quadrants { values: vec![0.0, 1.0, 0.5, 2.0] }, &[12, 10], 2).unwrap().tensor;
        let y = noisy(&f0, 0.3, 5).unwrap();
        let fit = fit_all_margins(&y, &AnovaFitConfig::new(2, LambdaRule::Universal { sigma: 0.3, scale: 1.0 })).unwrap();
        let parts = anova_mse_contributions(&fit.fitted, &f0, 2).unwrap();
        let total = fit.fitted.sub(&f0).unwrap().frobenius_sq() / 120.0;
        let sum: f64 = parts.iter().map(|(_, v)| v).sum();
        assert!((sum - total).abs() <= 1e-9 * total.max(1.0), "{sum} vs {total}");
    }

    #[test]
    fn calibration_picks_a_candidate_and_is_recorded() {
        let mut c = cfg(vec![64, 128], 4, 0.5);
        c.signal = SignalSpec::Sawtooth { teeth: 2, amplitude: 1.0 };
        let cal = calibrate_grid_scale(&c, &[0.25, 1.0, 4.0], 4).unwrap();
        assert_eq!(cal.table.len(), 3);
        let best = cal.table.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        assert!(cal.table.iter().any(|&(s, m)| s == cal.scale && m == best));
        c.lambda = LambdaChoice::GridCalibrated { candidates: vec![0.25, 1.0, 4.0], replicates: 4 };
        let r = run_rate_experiment(&c).unwrap();
        assert_eq!(r.calibration.as_ref(), Some(&cal));
        let expected = grid_scaled_lambda(0.5, 64, 1, 1, cal.scale);
        assert!((r.records[0].lambda - expected).abs() < 1e-15);
    }
}
