//! Bounds on the best expected approximation ratio of randomized monotone,
//! task-independent, scale-free mechanisms for scheduling on two unrelated
//! machines.
//!
//! * [`mechanism`]: threshold allocation, makespans, `phi` and Monte Carlo.
//! * [`cdf`], [`grid`]: finite CDFs on sentinel-extended grids.
//! * [`lower_bound`]: the epigraph LP over grid CDFs.
//! * [`upper_bound`]: piecewise-constant extension and its exact supremum.
//! * [`two_task`]: the copula family for two tasks and the cutting-plane loop.
//!
//! Numerical code is generic over [`Scalar`], so the same routines run in
//! `f64` and in exact rationals.

pub mod cdf;
pub mod error;
pub mod grid;
pub mod lower_bound;
pub mod lp;
pub mod mechanism;
pub mod report;
pub mod scalar;
pub mod two_task;
pub mod upper_bound;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;

pub type Grid = grid::GridSet<f64>;
pub type GridF32 = grid::GridSet<f32>;
pub type ExactGrid = grid::GridSet<Rational>;

pub type Cdf = cdf::FiniteCDF<f64>;
pub type ExactCdf = cdf::FiniteCDF<Rational>;

pub type TwoTaskCdf = two_task::PiecewiseRationalCDF<f64>;
pub type ExactTwoTaskCdf = two_task::PiecewiseRationalCDF<Rational>;
