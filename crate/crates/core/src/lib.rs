//! Simulation and testing toolkit for quasi-stationary competing particle
//! systems: Poisson point processes, Poisson–Dirichlet mass partitions,
//! their additive and multiplicative evolutions, front diagnostics and
//! two-sample invariance tests.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod pointproc;
pub mod rng;
pub mod special;
pub mod stattest;

pub use error::{Error, Result};
