//! Time grid, domain, problem data and noise shared by the rest of the crate.

mod coefficients;
mod domain;
mod grid;
pub mod noise;

pub use coefficients::{
    AssumptionConstants, CoefficientSet, Driver, NoiseCoefficient, StateMap, TerminalMap, TimeMap,
};
pub use domain::{Domain, NearestFace};
pub use grid::TimeGrid;
pub use noise::NoiseBundle;
