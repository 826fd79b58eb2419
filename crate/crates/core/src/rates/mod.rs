//! Convergence-rate experiments: error ladders on nested grids, log-log rate
//! fits, and the multilevel-versus-classical comparison.

mod compare;
mod fit;
mod ladder;

pub use compare::{compare_mlmc_classical, ComparisonConfig, ComparisonReport};
pub use fit::{fit_rate, FitWindow, RateFit};
pub use ladder::{
    error_ladders, strong_error_curve, weak_error_curve, ErrorLadder, LadderPair, LadderRequest,
    StrongNorm, StrongReference, CONFIDENCE_Z, LADDER_FAMILY,
};
