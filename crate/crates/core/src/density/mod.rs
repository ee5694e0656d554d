//! 1-D grid engine for the mean-field operator
//! `T[rho] = phi_sigma * S_K[C_K[rho]]` and its evolutions.
//!
//! Densities live on uniform grids `x_j = -L + j dx`, `dx = 2L/M`. The
//! `K`-fold self-convolution is computed spectrally on a zero-padded grid of
//! half-width `K L` with the same spacing, so the rescaling `S_K` reduces to
//! taking every `K`-th node. Every spectral step clips round-off negatives
//! (within a hard clipped-mass budget), zeroes values below the FFT noise
//! floor and renormalizes to unit mass.

mod grid;
pub mod io;
mod ops;
mod spectral;

pub use grid::{GaussianProfile, GridDensity, GridSpec};
pub use ops::{
    apply_t, convolve, evolve_continuous, evolve_continuous_with, gaussian_smooth, iterate, scale, scale_onto,
    self_convolve, shift,
};

/// Maximum tolerated mass outside `[-0.9 L, 0.9 L]`.
pub const TAIL_THRESHOLD: f64 = 1e-8;

/// Maximum tolerated mass of negative values clipped after a spectral step.
pub const CLIP_BUDGET: f64 = 1e-9;

/// Tolerance on `dx * sum(values) = 1`.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Values below this fraction of the peak after an FFT round trip are
/// round-off and are set to zero.
pub const NOISE_FLOOR: f64 = 1e-14;

/// Largest `lambda * dt` accepted by the continuous-time evolution.
pub const MAX_LAMBDA_DT: f64 = 0.1;
