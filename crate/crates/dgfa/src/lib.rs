//! Dynamic generalized factor analysis: nested truncated state-space models of
//! growing cross-sectional dimension, static Bayes estimation, steady-state
//! Kalman predictor and pure-filter synthesis, and the diagnostics that
//! contrast the two as the number of outputs grows.
//!
//! The numerical kernels are generic over the working scalar (`f32`/`f64`)
//! through [`Scalar`]; the `*64` aliases below fix `f64` for everyday use.

pub mod error;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod pollution;
pub mod scalar;
pub mod simulate;
pub mod static_gfa;

pub use error::{Error, Result};
pub use scalar::{mat_from_f64, real, to_f64, Scalar};

// The linear-algebra backend, re-exported for downstream matrix construction.
pub use nalgebra;

/// Double-precision factor dynamics.
pub type FactorDynamics64 = model::FactorDynamics<f64>;
/// Double-precision truncated model.
pub type TruncatedModel64 = model::TruncatedModel<f64>;
/// Double-precision steady-state predictor solution.
pub type PredictorSolution64 = kalman::PredictorSolution<f64>;
/// Double-precision steady-state filter solution.
pub type FilterSolution64 = kalman::FilterSolution<f64>;
/// Double-precision static factor model.
pub type StaticModel64 = static_gfa::StaticModel<f64>;
/// Double-precision simulated trajectory.
pub type Trajectory64 = simulate::Trajectory<f64>;
