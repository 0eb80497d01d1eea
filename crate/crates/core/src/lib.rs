//! Payoff-based learning of variational generalized Nash equilibria in strongly monotone
//! games with shared affine constraints `K a <= l`.
//!
//! Players only observe their own cost values and the constraint value at the played
//! action. Each keeps a Gaussian mixed strategy, estimates its partial gradient from one
//! or two payoff queries, and takes a projected step; a shared multiplier tracks the
//! constraint with a Tikhonov term whose weight decays over time.
//!
//! Modules:
//! - [`game`]: games, costs, constraints and pseudo-gradients;
//! - [`geometry`]: box, orthant and shrunk-box projections;
//! - [`schedules`]: power-law step, regularization, smoothing and shrink schedules;
//! - [`estimators`]: query sampling and gradient estimates;
//! - [`learner`]: the learning loop and its traces;
//! - [`oracle`]: full-information reference solutions and diagnostics;
//! - [`builtin`]: ready-made games.

#![no_std]

extern crate alloc;

pub mod builtin;
pub mod error;
pub mod estimators;
pub mod game;
pub mod geometry;
pub mod learner;
pub mod oracle;
pub mod schedules;

pub use error::{Error, Result};
pub use game::{AugmentedPoint, BoxSet, CostOracle, FnCost, GameSpec, QuadraticCost};
pub use learner::{run, LearnerState, RunConfig, Trace};
pub use schedules::{FeedbackMode, ScheduleConfig};

pub use nalgebra::{DMatrix, DVector};
