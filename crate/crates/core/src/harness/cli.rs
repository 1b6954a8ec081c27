//! Command-line interface of the `vtf` binary.
//!
//! Exit codes: 0 on success, 1 on invalid input or any other error, 2 when a
//! certification check fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::anova::{anova_decompose, margin_dimension};
use crate::certify::{run_suite, OracleOptions, SuiteConfig};
use crate::dictionary::ProductDictionary;
use crate::error::{Error, Result};
use crate::grid::{mesh_grid, regular_grid, BoxRule};
use crate::harness::config::ExperimentConfig;
use crate::harness::rates::run_rate_experiment;
use crate::harness::svg::render_svg;
use crate::io::{load_vtf, save_vtf, write_indices};
use crate::solver::{fit_all_margins, fit_margin, universal_lambda, AnovaFitConfig, FitConfig, LambdaRule, SolverKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CERTIFICATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "vtf", version, about = "Vitali total variation trend filtering for tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Denoise a VTF1 tensor and write the estimate plus a JSON summary.
    Denoise(DenoiseArgs),
    /// Print the squared norms of the ANOVA components of a VTF1 tensor as JSON.
    Anova(AnovaArgs),
    /// Run a Monte Carlo rate experiment from a config file.
    Rates(RatesArgs),
    /// Run the certification suite and write its report CSV.
    Certify(CertifyArgs),
    /// Write active sets (regular grids or mesh grids), one multi-index per line.
    Grids(GridsArgs),
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Penalty level; defaults to the universal level when `--sigma` is given.
    #[arg(long)]
    lambda: Option<f64>,
    /// Noise level used by the universal penalty level.
    #[arg(long)]
    sigma: Option<f64>,
    /// Multiplier of the universal level.
    #[arg(long, default_value_t = 1.0)]
    lambda_scale: f64,
    /// Fit every ANOVA margin instead of the full margin plus least squares on the null space.
    #[arg(long)]
    anova: bool,
    #[arg(long, default_value = "active-set")]
    solver: String,
    /// Write the JSON summary here instead of standard output.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnovaArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// JSON summary with per-size means and slope fits.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, default_value_t = 2000)]
    oracle_iterations: usize,
    #[arg(long, default_value_t = 20)]
    oracle_restarts: usize,
    /// CSV output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridsArgs {
    #[command(subcommand)]
    kind: GridKind,
}

#[derive(Debug, Subcommand)]
enum GridKind {
    /// `s` equispaced jumps per axis in the admissible box.
    Regular {
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        per_axis: usize,
        #[arg(long)]
        enlarged: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mesh grid with parameter `delta`.
    Mesh {
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: usize,
        #[arg(long)]
        enlarged: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct DenoiseSummary {
    shape: Vec<usize>,
    k: usize,
    mode: &'static str,
    lambda: f64,
    objective: Option<f64>,
    kkt_residual: Option<f64>,
    iterations: Option<usize>,
    converged: bool,
    support: usize,
    residual_mse: f64,
}

#[derive(Debug, Serialize)]
struct ComponentNorm {
    margin: String,
    dimension: usize,
    norm_sq: f64,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let y = load_vtf(&a.input)?;
    let solver: SolverKind = a.solver.parse()?;
    let n = y.len();
    let summary = if a.anova {
        let rule = match (a.lambda, a.sigma) {
            (Some(lambda), _) => LambdaRule::Fixed { lambda },
            (None, Some(sigma)) => LambdaRule::Universal { sigma, scale: a.lambda_scale },
            (None, None) => return Err(Error::Invalid("give --lambda or --sigma".into())),
        };
        let mut cfg = AnovaFitConfig::new(a.k, rule.clone());
        cfg.solver = solver;
        let fit = fit_all_margins(&y, &cfg)?;
        save_vtf(&fit.fitted, &a.output)?;
        let full = fit.margins.iter().find(|m| m.key.axes.len() == y.ndim());
        DenoiseSummary {
            shape: y.shape().to_vec(),
            k: a.k,
            mode: "anova",
            lambda: full.map_or(f64::NAN, |m| m.lambda),
            objective: None,
            kkt_residual: fit.margins.iter().filter_map(|m| m.fit.as_ref()).map(|f| f.kkt_residual).reduce(f64::max),
            iterations: fit.margins.iter().filter_map(|m| m.fit.as_ref()).map(|f| f.iterations).reduce(usize::max),
            converged: fit.margins.iter().filter_map(|m| m.fit.as_ref()).all(|f| f.converged),
            support: fit.margins.iter().filter_map(|m| m.fit.as_ref()).map(|f| f.support_size()).sum(),
            residual_mse: y.sub(&fit.fitted)?.frobenius_sq() / n as f64,
        }
    } else {
        let lambda = match (a.lambda, a.sigma) {
            (Some(l), _) => l,
            (None, Some(sigma)) => a.lambda_scale * universal_lambda(sigma, n),
            (None, None) => return Err(Error::Invalid("give --lambda or --sigma".into())),
        };
        let fit = fit_margin(&y, a.k, &FitConfig::new(lambda).with_solver(solver))?;
        let perp = ProductDictionary::new(y.shape(), a.k)?.project(&y)?;
        let mut estimate = y.sub(&perp)?;
        estimate.add_assign(&fit.fitted)?;
        save_vtf(&estimate, &a.output)?;
        DenoiseSummary {
            shape: y.shape().to_vec(),
            k: a.k,
            mode: "full-margin",
            lambda,
            objective: Some(fit.objective),
            kkt_residual: Some(fit.kkt_residual),
            iterations: Some(fit.iterations),
            converged: fit.converged,
            support: fit.support_size(),
            residual_mse: y.sub(&estimate)?.frobenius_sq() / n as f64,
        }
    };
    write_json(&summary, a.summary.as_deref())
}

fn anova(a: AnovaArgs) -> Result<()> {
    let f = load_vtf(&a.input)?;
    let rows: Vec<ComponentNorm> = anova_decompose(&f, a.k)?
        .into_iter()
        .map(|(key, c)| ComponentNorm { dimension: margin_dimension(f.shape(), a.k, &key), margin: key.to_string(), norm_sq: c.frobenius_sq() })
        .collect();
    write_json(&rows, None)
}

fn rates(a: RatesArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let result = run_rate_experiment(&cfg)?;
    result.write_csv(sink(a.out.as_deref())?)?;
    if let Some(path) = &a.svg {
        let title = format!("d={} k={} sigma={}", cfg.d, cfg.k, cfg.sigma);
        std::fs::write(path, render_svg(&result, &title))?;
    }
    if let Some(path) = &a.summary {
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a ExperimentConfig,
            points: &'a [crate::harness::rates::RatePoint],
            fit_full: Option<crate::certify::SlopeFit>,
            fit_half: Option<crate::certify::SlopeFit>,
            failures: usize,
            calibration: Option<&'a crate::harness::rates::Calibration>,
        }
        let s = Summary {
            config: &cfg,
            points: &result.points,
            fit_full: result.fit_full,
            fit_half: result.fit_half,
            failures: result.failures(),
            calibration: result.calibration.as_ref(),
        };
        write_json(&s, Some(path))?;
    }
    if let Some(cal) = &result.calibration {
        eprintln!("calibrated grid-scaled constant {}", cal.scale);
    }
    if let Some(fit) = result.fit_half {
        eprintln!("slope (largest half) {:.4} +- {:.4}", fit.slope, fit.half_width);
    }
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<()> {
    let mut cfg = SuiteConfig::new(a.k, a.d, a.n, a.seed);
    cfg.instances = a.instances;
    cfg.oracle = OracleOptions { iterations: a.oracle_iterations, restarts: a.oracle_restarts, seed: a.seed, ..Default::default() };
    let report = run_suite(&cfg)?;
    report.write_csv(sink(a.out.as_deref())?)?;
    let failed: Vec<&str> = report.failures().map(|r| r.check_name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Certification(failed.join(", ")))
    }
}

fn grids(a: GridsArgs) -> Result<()> {
    let (indices, out) = match a.kind {
        GridKind::Regular { shape, k, per_axis, enlarged, out } => {
            let set = regular_grid(&shape, k, per_axis, BoxRule::Standard)?;
            (if enlarged { set.enlarge() } else { set.jumps().to_vec() }, out)
        }
        GridKind::Mesh { shape, k, delta, enlarged, out } => {
            let mesh = mesh_grid(&shape, k, delta)?;
            (if enlarged { mesh.enlarged } else { mesh.jumps }, out)
        }
    };
    write_indices(&indices, sink(out.as_deref())?)
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Denoise(a) => denoise(a),
        Command::Anova(a) => anova(a),
        Command::Rates(a) => rates(a),
        Command::Certify(a) => certify(a),
        Command::Grids(a) => grids(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Error::Certification(names)) => {
            eprintln!("vtf: certification failed: {names}");
            EXIT_CERTIFICATION
        }
        Err(e) => {
            eprintln!("vtf: {e}");
            EXIT_INVALID
        }
    }
}
