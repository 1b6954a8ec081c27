//! Rate-experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! d = 1
//! k = 1
//! n = [256, 512, 1024]      # per-axis extents, strictly increasing
//! sigma = 0.5
//! replicates = 100
//! seed = 7                  # overridden by VTF_SEED
//! mode = "l0"               # "l0" (full margin) or "anova" (whole tensor)
//! lambda = "universal"      # "universal", "grid-scaled", "grid-calibrated" or "sweep"
//! lambda_scale = 1.0
//! sweep = [0.25, 0.5, 1.0]  # multiples of the universal level, for "sweep"
//! candidates = [0.25, 1.0]  # grid-scaled constants, for "grid-calibrated"
//! calibration_replicates = 20
//! signal = "jumps"          # "jumps", "sawtooth" or "quadrants"
//! s0 = 2                    # jumps
//! teeth = 4                 # sawtooth
//! amplitude = 1.0           # jumps and sawtooth
//! values = [0, 0, 0, 1]     # quadrants, one value per orthant
//! solver = "active-set"
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::signal::SignalSpec;
use crate::solver::SolverKind;

pub const SEED_ENV: &str = "VTF_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMode {
    /// Fit the full margin `M = [d]` and score `||f^ - f0_perp||^2 / n`.
    L0,
    /// Fit every ANOVA margin and score the whole-tensor `||f^ - f0||^2 / n`.
    Anova,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum LambdaChoice {
    /// `scale * lambda_0(log 2n)`; per margin in ANOVA mode.
    Universal { scale: f64 },
    /// `scale * sigma * n^{-(H+2k-1)/(2H+2k-1)} (log n)^{H/(2H+2k-1)}`, `H` the harmonic number of `d`.
    GridScaled { scale: f64 },
    /// `GridScaled` with the constant chosen among `candidates` by mean MSE at
    /// the smallest size over `replicates` independent draws.
    GridCalibrated { candidates: Vec<f64>, replicates: usize },
    /// Best of `factor * lambda_0(log 2n)` over the listed factors, per replicate.
    Sweep { factors: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    /// Per-axis extents; the tensor at step `t` has shape `[n[t]; d]`.
    pub n: Vec<usize>,
    pub sigma: f64,
    pub replicates: usize,
    pub lambda: LambdaChoice,
    pub signal: SignalSpec,
    pub seed: u64,
    pub mode: ErrorMode,
    pub solver: SolverKind,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::Config("d and k must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.n.is_empty() || self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("n schedule {:?} must be non-empty and strictly increasing", self.n)));
        }
        if self.n[0] <= self.k + 1 {
            return Err(Error::Config(format!("extent {} too small for k = {}", self.n[0], self.k)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and non-negative, got {}", self.sigma)));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match &self.lambda {
            LambdaChoice::Universal { scale } | LambdaChoice::GridScaled { scale } if !positive(*scale) => {
                return Err(Error::Config(format!("lambda scale must be positive, got {scale}")));
            }
            LambdaChoice::Sweep { factors } if factors.is_empty() || !factors.iter().all(|&f| positive(f)) => {
                return Err(Error::Config("a sweep needs at least one positive factor".into()));
            }
            LambdaChoice::GridCalibrated { candidates, replicates }
                if candidates.is_empty() || *replicates == 0 || !candidates.iter().all(|&f| positive(f)) =>
            {
                return Err(Error::Config("calibration needs positive candidates and at least one replicate".into()));
            }
            LambdaChoice::GridScaled { .. } | LambdaChoice::GridCalibrated { .. } | LambdaChoice::Sweep { .. } if self.mode == ErrorMode::Anova => {
                return Err(Error::Config("ANOVA mode supports the universal lambda rule only".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Parses the flat text format and applies the `VTF_SEED` override.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let mut cfg = raw.into_config()?;
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.seed = seed.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={seed} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    d: usize,
    k: usize,
    n: Vec<usize>,
    sigma: f64,
    replicates: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default = "default_lambda")]
    lambda: String,
    #[serde(default = "one")]
    lambda_scale: f64,
    #[serde(default)]
    sweep: Vec<f64>,
    #[serde(default)]
    candidates: Vec<f64>,
    #[serde(default = "twenty")]
    calibration_replicates: usize,
    signal: String,
    s0: Option<usize>,
    teeth: Option<usize>,
    #[serde(default = "one")]
    amplitude: f64,
    values: Option<Vec<f64>>,
    #[serde(default = "default_solver")]
    solver: String,
}

fn default_mode() -> String {
    "l0".into()
}

fn default_lambda() -> String {
    "universal".into()
}

fn default_solver() -> String {
    "active-set".into()
}

fn twenty() -> usize {
    20
}

fn one() -> f64 {
    1.0
}

fn require<T>(v: Option<T>, key: &str, signal: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("signal '{signal}' needs key '{key}'")))
}

impl RawConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mode = match self.mode.as_str() {
            "l0" => ErrorMode::L0,
            "anova" => ErrorMode::Anova,
            other => return Err(Error::Config(format!("unknown mode '{other}'"))),
        };
        let lambda = match self.lambda.as_str() {
            "universal" => LambdaChoice::Universal { scale: self.lambda_scale },
            "grid-scaled" => LambdaChoice::GridScaled { scale: self.lambda_scale },
            "grid-calibrated" => {
                LambdaChoice::GridCalibrated { candidates: self.candidates, replicates: self.calibration_replicates }
            }
            "sweep" => LambdaChoice::Sweep { factors: self.sweep },
            other => return Err(Error::Config(format!("unknown lambda rule '{other}'"))),
        };
        let signal = match self.signal.as_str() {
            "jumps" => SignalSpec::Jumps { s0: require(self.s0, "s0", "jumps")?, amplitude: self.amplitude },
            "sawtooth" => SignalSpec::Sawtooth { teeth: require(self.teeth, "teeth", "sawtooth")?, amplitude: self.amplitude },
            "quadrants" => SignalSpec::Quadrants { values: require(self.values, "values", "quadrants")? },
            other => return Err(Error::Config(format!("unknown signal '{other}'"))),
        };
        Ok(ExperimentConfig {
            d: self.d,
            k: self.k,
            n: self.n,
            sigma: self.sigma,
            replicates: self.replicates,
            lambda,
            signal,
            seed: self.seed,
            mode,
            solver: self.solver.parse()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "d = 1\nk = 1\nn = [64, 128]\nsigma = 0.5\nreplicates = 3\nseed = 9\nsignal = \"jumps\"\ns0 = 2\n";

    #[test]
    fn parses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.mode, ErrorMode::L0);
        assert_eq!(cfg.lambda, LambdaChoice::Universal { scale: 1.0 });
        assert_eq!(cfg.signal, SignalSpec::Jumps { s0: 2, amplitude: 1.0 });
        assert_eq!(cfg.solver, SolverKind::ActiveSet);
    }

    #[test]
    fn rejects_bad_schedules_and_keys() {
        assert!(ExperimentConfig::from_toml_str(&BASE.replace("[64, 128]", "[128, 64]")).is_err());
        assert!(ExperimentConfig::from_toml_str(&BASE.replace("replicates = 3", "replicates = 0")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{BASE}colour = 1\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&BASE.replace("s0 = 2\n", "")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{BASE}mode = \"anova\"\nlambda = \"sweep\"\nsweep = [1.0]\n")).is_err());
    }

    #[test]
    fn sweep_and_quadrants() {
        let text = "d = 2\nk = 1\nn = [16, 32]\nsigma = 1\nreplicates = 2\nmode = \"anova\"\nsignal = \"quadrants\"\nvalues = [0, 0, 0, 1]\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.signal, SignalSpec::Quadrants { values: vec![0.0, 0.0, 0.0, 1.0] });
        let text = BASE.to_string() + "lambda = \"sweep\"\nsweep = [0.5, 1.0]\n";
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.lambda, LambdaChoice::Sweep { factors: vec![0.5, 1.0] });
        let text = BASE.to_string() + "lambda = \"grid-calibrated\"\ncandidates = [0.5, 2]\n";
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.lambda, LambdaChoice::GridCalibrated { candidates: vec![0.5, 2.0], replicates: 20 });
        assert!(ExperimentConfig::from_toml_str(&(BASE.to_string() + "lambda = \"grid-calibrated\"\n")).is_err());
    }
}
