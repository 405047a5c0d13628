//! Analysis toolkit for tunnel-junction barriers.
//!
//! - [`simmons`]: rectangular-barrier tunneling current and low-bias resistance.
//! - [`fitting`]: damped least squares for Simmons and double-Gaussian fits,
//!   maximum-likelihood normal/lognormal fits.
//! - [`mc`]: Monte-Carlo junctions built from pixelized barriers.
//! - [`breakdown`]: thinnest-point statistics and breakdown analysis.
//! - [`stem`]: forward simulation of STEM-EDS cross sections.
//! - [`edge`]: kernel-integration edge detection on EDS images.
//! - [`io`]: file formats shared by the command-line tool.
//!
//! The Simmons model and the fitters are generic over [`Real`] (`f32`,
//! `f64`); the aliases below name the `f64` and `f32` instantiations.

// `!(x > 0.0)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod breakdown;
pub mod constants;
pub mod edge;
pub mod error;
pub mod fitting;
pub mod grid;
pub mod io;
mod linalg;
pub mod mc;
pub mod rng;
pub mod scalar;
pub mod simmons;
pub mod stats;
pub mod stem;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SimmonsParams64 = simmons::SimmonsParams<f64>;
pub type SimmonsParams32 = simmons::SimmonsParams<f32>;
pub type IvCurve64 = simmons::IvCurve<f64>;
pub type IvCurve32 = simmons::IvCurve<f32>;
pub type FitResult64 = fitting::FitResult<f64>;
pub type FitResult32 = fitting::FitResult<f32>;
pub type DistributionFit64 = fitting::DistributionFit<f64>;
