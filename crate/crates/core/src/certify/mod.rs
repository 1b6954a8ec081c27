//! Certification of the quantities entering the oracle inequalities:
//! antiprojections, noise weights, interpolating tensors and effective sparsity.

pub mod antiproj;
pub mod extended;
pub mod interp;
pub mod report;
pub mod scaling;
pub mod sparsity;
pub mod weights;

pub use antiproj::{antiprojection_exact, Antiprojection, Antiprojector};
pub use extended::{dictionary_identity_extended, tilde_columns_dd, IdentityCheck};
pub use weights::{antiprojection_bound, gamma_tilde, noise_weights, NoiseWeightBundle, WeightForm};
pub use interp::{
    build_interpolating_tensor, interp_polys, matched_polys, printed_polys, InterpPolys, InterpValidity,
    InterpolatingTensor, PiecewiseFn, Piece, PolyCheck, PolySource,
};
pub use sparsity::{effective_sparsity_oracle, effective_sparsity_upper, OracleOptions};
pub use scaling::{discrete_diff_scaling, fit_loglog, mesh_gamma_scaling, regular_gamma_scaling, GammaScaling, PowerKind, SlopeFit};
pub use report::{run_suite, CheckRow, Report, SuiteConfig};
