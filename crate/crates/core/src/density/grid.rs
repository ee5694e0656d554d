use serde::{Deserialize, Serialize};

use super::{MASS_TOLERANCE, TAIL_THRESHOLD};
use crate::error::{KavgError, Result};

/// Uniform 1-D grid: `M` nodes `x_j = -L + j dx`, `dx = 2L/M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    points: usize,
}

impl Default for GridSpec {
    /// `L = 4`, `M = 2^14`.
    fn default() -> Self {
        Self {
            half_width: 4.0,
            points: 1 << 14,
        }
    }
}

impl GridSpec {
    pub const MIN_POINTS: usize = 256;

    /// `points` must be a power of two, at least [`Self::MIN_POINTS`].
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(KavgError::invalid(format!(
                "grid half-width must be > 0 (got {half_width})"
            )));
        }
        if points < Self::MIN_POINTS || !points.is_power_of_two() {
            return Err(KavgError::invalid(format!(
                "grid points must be a power of two >= {} (got {points})",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { half_width, points })
    }

    /// `L = 32`, `M = 2^16` (`dx ~ 9.8e-4`): wide enough for Laplace starts.
    pub fn wide() -> Self {
        Self {
            half_width: 32.0,
            points: 1 << 16,
        }
    }

    /// Grid of half-width `k L` with the same spacing (`k M` nodes). Node
    /// `k j` of the result sits at `k x_j`.
    pub(crate) fn extended(&self, k: usize) -> Self {
        Self {
            half_width: self.half_width * k as f64,
            points: self.points * k,
        }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.dx();
        (0..self.points).map(move |j| -self.half_width + j as f64 * dx)
    }

    /// Fractional node index of `x`.
    pub fn position(&self, x: f64) -> f64 {
        (x + self.half_width) / self.dx()
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(KavgError::GridMismatch(format!(
                "(L = {}, M = {}) vs (L = {}, M = {})",
                self.half_width, self.points, other.half_width, other.points
            )))
        }
    }
}

/// Closed-form log-density carried by Gaussian grid densities so that
/// divergences against them stay finite where the sampled values underflow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianProfile {
    pub mean: f64,
    pub variance: f64,
    /// `ln(sum_j exp(-(x_j - mean)^2 / (2 variance)))` over the grid nodes.
    log_norm: f64,
}

impl GaussianProfile {
    pub fn on_grid(grid: &GridSpec, mean: f64, variance: f64) -> Self {
        let log_norm = grid
            .nodes()
            .map(|x| (-(x - mean).powi(2) / (2.0 * variance)).exp())
            .sum::<f64>()
            .ln();
        Self {
            mean,
            variance,
            log_norm,
        }
    }

    /// Log of the normalized node probability `h_j dx`.
    pub fn log_node_mass(&self, x: f64) -> f64 {
        -(x - self.mean).powi(2) / (2.0 * self.variance) - self.log_norm
    }
}

/// Nonnegative, unit-mass density sampled at the nodes of a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    grid: GridSpec,
    values: Vec<f64>,
    profile: Option<GaussianProfile>,
}

impl GridDensity {
    /// Wraps values that already have unit mass (within `1e-10`).
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values)?;
        let mass = grid.dx() * values.iter().sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(KavgError::InvalidDensity(format!("mass {mass} is not 1")));
        }
        Ok(Self {
            grid,
            values,
            profile: None,
        })
    }

    /// Scales nonnegative values to unit mass.
    pub fn normalized(grid: GridSpec, mut values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values)?;
        let mass = grid.dx() * values.iter().sum::<f64>();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(KavgError::InvalidDensity(format!("cannot normalize mass {mass}")));
        }
        let inv = 1.0 / mass;
        values.iter_mut().for_each(|v| *v *= inv);
        Ok(Self {
            grid,
            values,
            profile: None,
        })
    }

    /// Values already cleaned and normalized by a spectral step.
    pub(super) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.points());
        Self {
            grid,
            values,
            profile: None,
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::normalized(*grid, grid.nodes().map(f).collect())
    }

    /// `N(mean, variance)` sampled at the nodes.
    pub fn gaussian(grid: &GridSpec, mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(KavgError::invalid(format!("variance must be > 0 (got {variance})")));
        }
        let kernel: Vec<f64> = grid
            .nodes()
            .map(|x| (-(x - mean).powi(2) / (2.0 * variance)).exp())
            .collect();
        let log_norm = kernel.iter().sum::<f64>().ln();
        let mut rho = Self::normalized(*grid, kernel)?;
        rho.profile = Some(GaussianProfile {
            mean,
            variance,
            log_norm,
        });
        Ok(rho)
    }

    /// Uniform on `[-a, a]`. Each node carries the fraction of its cell
    /// `[x_j - dx/2, x_j + dx/2]` covered by the support, so endpoints lying
    /// on nodes get half weight.
    pub fn uniform(grid: &GridSpec, a: f64) -> Result<Self> {
        if !(a > grid.dx() && a.is_finite()) {
            return Err(KavgError::invalid(format!("uniform half-width {a} must exceed dx")));
        }
        let h = grid.dx();
        Self::from_fn(grid, |x| {
            let lo = (x - h / 2.0).max(-a);
            let hi = (x + h / 2.0).min(a);
            (hi - lo).max(0.0) / h
        })
    }

    /// Laplace density `exp(-|x|/b) / (2b)`.
    ///
    /// The kink at `x = 0` (always a node) biases plain trapezoid sums by
    /// `+dx^2/(12 b^2)`; the node at zero is lowered by `dx/(12 b^2)`, which
    /// makes the discrete mass and the discrete entropy `O(dx^4)` accurate.
    pub fn laplace(grid: &GridSpec, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(KavgError::invalid(format!("Laplace scale must be > 0 (got {b})")));
        }
        let h = grid.dx();
        let mut values: Vec<f64> = grid.nodes().map(|x| (-x.abs() / b).exp() / (2.0 * b)).collect();
        values[grid.points() / 2] -= h / (12.0 * b * b);
        Self::normalized(*grid, values)
    }

    /// Unit point mass on the node nearest to `x`.
    pub fn point(grid: &GridSpec, x: f64) -> Result<Self> {
        let j = grid.position(x).round();
        if j < 0.0 || j >= grid.points() as f64 {
            return Err(KavgError::invalid(format!("point {x} outside the grid")));
        }
        let mut values = vec![0.0; grid.points()];
        values[j as usize] = 1.0 / grid.dx();
        Ok(Self {
            grid: *grid,
            values,
            profile: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn profile(&self) -> Option<&GaussianProfile> {
        self.profile.as_ref()
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn mass(&self) -> f64 {
        self.dx() * self.values.iter().sum::<f64>()
    }

    /// `integral of f(x) rho(x) dx` by the node sum.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.dx() * self.grid.nodes().zip(&self.values).map(|(x, v)| f(x) * v).sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    /// Linear interpolation between nodes; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let p = self.grid.position(x);
        if p < 0.0 || p > (self.grid.points() - 1) as f64 {
            return 0.0;
        }
        let i = p.floor() as usize;
        if i + 1 >= self.grid.points() {
            return self.values[i];
        }
        let t = p - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Mass outside `[-0.9 L, 0.9 L]`.
    pub fn tail_mass(&self) -> f64 {
        let cut = 0.9 * self.grid.half_width();
        self.dx()
            * self
                .grid
                .nodes()
                .zip(&self.values)
                .filter(|(x, _)| x.abs() > cut)
                .map(|(_, v)| v)
                .sum::<f64>()
    }

    pub fn check_tails(&self, threshold: f64) -> Result<()> {
        let mass = self.tail_mass();
        if mass > threshold {
            Err(KavgError::TailTruncated { mass, threshold })
        } else {
            Ok(())
        }
    }

    /// Tail check at the default [`TAIL_THRESHOLD`].
    pub fn ensure_resolved(self) -> Result<Self> {
        self.check_tails(TAIL_THRESHOLD)?;
        Ok(self)
    }
}

fn check_values(grid: &GridSpec, values: &[f64]) -> Result<()> {
    if values.len() != grid.points() {
        return Err(KavgError::InvalidDensity(format!(
            "{} values for a grid of {} points",
            values.len(),
            grid.points()
        )));
    }
    if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(KavgError::InvalidDensity(format!(
            "value {v} at x = {} (must be finite and >= 0)",
            grid.node(j)
        )));
    }
    Ok(())
}
