//! Least-squares and maximum-likelihood estimation.

mod distribution;
mod double_gaussian;
pub mod lm;
mod simmons_fit;

pub use distribution::{
    fit_lognormal, fit_normal, fit_thickness_distribution, lognormal_log_params, lognormal_moments, DistributionFit,
    DistributionKind, ThicknessFits,
};
pub use double_gaussian::{fit_double_gaussian, DoubleGaussianFit, DoubleGaussianParams};
pub use simmons_fit::{fit_simmons, fit_simmons_with, simmons_residual_norm, AreaMode, FitResult};
