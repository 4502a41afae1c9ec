//! Scenario-based regularized sample average approximation.
//!
//! The crate solves stochastic programs of the form
//! `min_x (1/n) sum_i F(x, xi_i) + eps * R(x)`, where `R` aggregates the
//! dual norms of worst-case loss gradients at a chosen set of scenarios, and
//! benchmarks them against Wasserstein distributionally robust models.
//!
//! Problem families: a multi-product [`newsvendor`] and a mean-CVaR
//! [`portfolio`]. The [`motivex`] module holds a one-dimensional example
//! where 1- and 2-Wasserstein models disagree about tail risk.
//!
//! Parallel loops use rayon when the `parallel` feature is enabled (the
//! default); results are identical either way.

pub mod error;
pub mod eval;
pub mod measure;
pub mod motivex;
pub mod newsvendor;
pub mod par;
pub mod portfolio;
pub mod rng;
pub mod scenarios;
pub mod solve;
pub mod transport;
pub mod wdro;

pub use error::{Error, Result};
pub use measure::{cvar, epsilon_grid, weighted_mean, DiscreteMeasure, LossSample};
pub use scenarios::{Aggregation, RegularizerSpec};
