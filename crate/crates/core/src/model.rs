//! Model parameters and the Gaussian equilibrium of the mean-field map.

use serde::{Deserialize, Serialize};

use crate::density::{GridDensity, GridSpec};
use crate::error::{KavgError, Result};

/// How the `K` neighbors of an updating particle are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRule {
    /// i.i.d. uniform over all `N` particles, the updating one included.
    #[default]
    WithSelf,
    /// i.i.d. uniform over the other `N - 1` particles.
    ExcludeSelf,
}

/// Total event rate of the continuous-time model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalRateMode {
    /// Every particle carries its own rate-`lambda` clock: total rate `N lambda`.
    #[default]
    PerParticle,
    /// A single rate-`lambda` clock for the whole population.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spatial dimension.
    pub d: usize,
    /// Number of neighbors averaged per update.
    pub k: usize,
    /// Noise standard deviation.
    pub sigma: f64,
    /// Poisson clock rate per particle (continuous model only).
    pub lambda: f64,
    /// Population size.
    pub n: usize,
    #[serde(default)]
    pub neighbors: NeighborRule,
    #[serde(default)]
    pub rate_mode: TotalRateMode,
}

impl ModelParams {
    pub fn new(d: usize, k: usize, sigma: f64, lambda: f64, n: usize) -> Result<Self> {
        let params = Self {
            d,
            k,
            sigma,
            lambda,
            n,
            neighbors: NeighborRule::default(),
            rate_mode: TotalRateMode::default(),
        };
        params.validate()?;
        Ok(params)
    }

    /// One-dimensional parameters with `lambda = 1`.
    pub fn one_d(k: usize, sigma: f64, n: usize) -> Result<Self> {
        Self::new(1, k, sigma, 1.0, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(KavgError::invalid("dimension d must be >= 1"));
        }
        if self.k == 0 {
            return Err(KavgError::invalid("K must be >= 1"));
        }
        if self.n == 0 {
            return Err(KavgError::invalid("N must be >= 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(KavgError::invalid(format!("sigma must be > 0 (got {})", self.sigma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(KavgError::invalid(format!("lambda must be >= 0 (got {})", self.lambda)));
        }
        if self.neighbors == NeighborRule::ExcludeSelf && self.n < 2 {
            return Err(KavgError::invalid("excluding self requires N >= 2"));
        }
        Ok(())
    }

    /// Contraction factor `gamma = 1/K` of the mean-field map.
    pub fn gamma(&self) -> f64 {
        1.0 / self.k as f64
    }
}

/// Equilibrium variance `K sigma^2 / (K - 1)`.
pub fn equilibrium_variance(k: usize, sigma: f64) -> Result<f64> {
    if k < 2 {
        return Err(KavgError::EquilibriumUndefined(k));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(KavgError::invalid(format!("sigma must be > 0 (got {sigma})")));
    }
    let k = k as f64;
    Ok(k * sigma * sigma / (k - 1.0))
}

/// The centered Gaussian fixed point of `T`, sampled on `grid` and
/// renormalized to unit discrete mass. Requires half-width `>= 8 sigma_inf`.
pub fn equilibrium_density(grid: &GridSpec, k: usize, sigma: f64) -> Result<GridDensity> {
    let var = equilibrium_variance(k, sigma)?;
    let required = 8.0 * var.sqrt();
    if grid.half_width() < required {
        return Err(KavgError::EquilibriumTruncated {
            half_width: grid.half_width(),
            required,
        });
    }
    GridDensity::gaussian(grid, 0.0, var)
}
