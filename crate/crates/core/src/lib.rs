//! Simulation and numerical verification toolkit for the K-averaging
//! interacting-particle model.
//!
//! Each of `N` particles in `R^d` repeatedly jumps to the mean of `K`
//! uniformly sampled particles plus isotropic Gaussian noise of standard
//! deviation `sigma`. The crate provides
//!
//! - finite-`N` simulators in discrete time ([`particles`]) and continuous
//!   time ([`continuous`], exact event-driven),
//! - a 1-D grid engine for the mean-field operator
//!   `T[rho] = phi_sigma * S_K[C_K[rho]]` and its discrete and continuous
//!   evolutions ([`density`]),
//! - distances and information functionals between distributions
//!   ([`metrics`]),
//! - experiment runners, a TOML config loader and an acceptance suite
//!   ([`experiments`], [`config`], [`acceptance`]).

pub mod acceptance;
pub mod config;
pub mod continuous;
pub mod density;
pub mod error;
pub mod experiments;
pub mod init;
pub mod metrics;
pub mod model;
pub mod particles;
pub mod rng;
pub mod stats;

pub use error::{KavgError, Result};
pub use model::{equilibrium_density, equilibrium_variance, ModelParams};
pub use rng::RandomSource;
