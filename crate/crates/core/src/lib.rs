//! Tikhonov regularization in Hilbert scales for problems that are only
//! conditionally stable, with two model problems and a rate-study harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bspline;
pub mod error;
pub mod harness;
pub mod param_id;
pub mod problem;
pub mod regularizer;
pub mod scale;
pub mod smoothing;
pub mod special;

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use param_id::{CoefficientSpline, ParamIdProblem, ParamIdReference, ParamIdSpec, PenaltyScale, StateTrajectory};
pub use problem::ForwardProblem;
pub use regularizer::{
    apriori_alpha, apriori_exponent, discrepancy_run, functional_value, gauss_newton, minimize, simple_alpha,
    theoretical_rate, DiscrepancyOptions, DiscrepancyOutcome, ExponentValue, MinimizeReport, TikhonovSetup,
};
pub use scale::{
    apply_power, build_fourier_scale, build_pencil_scale, interpolation_ratio, scale_norm, ScaleElement, ScaleLabel,
    SpectralScale, StabilityParams, Violation,
};
pub use smoothing::{PeriodicSignal, SmoothingProblem, SmoothingReference, SmoothingSpec, StabilityVariant};
