//! Numerical laboratory for damped inertial gradient dynamics with
//! vanishing Tikhonov regularization: integrate
//! ẍ + δ√ε(t) ẋ + ∇f(x) + ε(t)x = 0, track the regularization path x_ε,
//! verify the Lyapunov energy inequalities along trajectories, and fit the
//! decay rates of values and trajectories.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod lyapunov;
pub mod problem;
pub mod rates;
pub mod tikhonov;
pub mod util;

pub use error::{Error, Result};
