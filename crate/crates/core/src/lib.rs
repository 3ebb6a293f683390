//! Monte Carlo solver for backward doubly stochastic differential equations
//! whose terminal time is the first exit of an Euler diffusion from a domain.
//!
//! The pipeline is: simulate stopped forward paths ([`forward`]), then walk
//! backwards in time regressing on a hypercube basis ([`regression`],
//! [`solver`]). [`oracles`] holds closed-form and transformation checks and
//! the pointwise evaluation of the associated stochastic PDE;
//! [`experiments`] drives repeated runs, tables and refinement sweeps.

pub mod error;
pub mod experiments;
pub mod forward;
pub mod model;
pub mod oracles;
pub mod regression;
pub mod solver;

pub use error::{Error, Result};
