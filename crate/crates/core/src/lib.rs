//! Successive pseudo-convex approximation toolkit.
//!
//! The [`engine`] module implements the generic iteration
//! `x^{t+1} = x^t + gamma^t (Bx^t - x^t)` with pluggable approximation and
//! stepsize rules. Three application solvers build on it:
//!
//! * [`lasso`]: soft-thresholding best response with closed-form exact
//!   line search for l1-regularized least squares, plus basis pursuit;
//! * [`mimo`]: sum capacity of the MIMO broadcast channel by waterfilling;
//! * [`ee`]: energy-efficiency power control by Dinkelbach's method.

pub mod engine;
pub mod ee;
pub mod error;
pub mod io;
pub mod lasso;
pub mod mimo;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use engine::{IterRecord, IterateTrace, Notice, Solution, StepsizeRule, StopCriteria, Termination};
