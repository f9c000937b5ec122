//! Monotone estimation of time-varying trends and regression coefficients with
//! joint simultaneous confidence bands for nonstationary time series.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod hypotest;
pub mod kernels;
pub mod linalg;
pub mod lrcov;
pub mod penalize;
pub mod rearrange;
pub mod rng;
pub mod scalar;
pub mod simgen;
pub mod smoother;
pub mod tuning;

pub use bootstrap::{run_scb_regression, run_scb_trend, ScbResult};
pub use error::{MonobandError, Result};
pub use hypotest::{Containment, TestOutcome, Witness};
pub use kernels::KernelSpec;
pub use penalize::{PenalizedScb, PenaltyConfig};
pub use rearrange::MonotoneFit;
pub use scalar::Scalar;
pub use simgen::{DgpSpec, Model, StudyConfig, StudyReport};
pub use smoother::{SmootherFit, TimeSeriesPanel};
pub use tuning::{BandwidthConfig, Tuned};

pub type Panel64 = TimeSeriesPanel<f64>;
pub type Panel32 = TimeSeriesPanel<f32>;
pub type Scb64 = ScbResult<f64>;
pub type Scb32 = ScbResult<f32>;
pub type Config64 = BandwidthConfig<f64>;
pub type Config32 = BandwidthConfig<f32>;
pub type MonotoneFit64 = MonotoneFit<f64>;
pub type PenalizedScb64 = PenalizedScb<f64>;
