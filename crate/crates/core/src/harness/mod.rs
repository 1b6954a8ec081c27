//! Signal generators, Monte Carlo rate experiments, configuration files and
//! result serialization.

pub mod cli;
pub mod config;
pub mod rates;
pub mod signal;
pub mod svg;

pub use cli::run_cli;
pub use config::{ErrorMode, ExperimentConfig, LambdaChoice, SEED_ENV};
pub use rates::{
    calibrate_grid_scale, calibration_seed, Calibration,
    anova_mse_contributions, grid_scaled_lambda, pairwise_sum, replicate_seed, run_rate_experiment, RatePoint, RateResult,
    ReplicateRecord,
};
pub use signal::{generate_signal, Piece, Signal, SignalSpec};
pub use svg::render_svg;
