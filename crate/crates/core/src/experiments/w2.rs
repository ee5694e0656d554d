use crate::config::{ExperimentConfig, ExperimentKind};
use crate::density::{iterate, TAIL_THRESHOLD};
use crate::error::Result;
use crate::metrics::w2_grid;
use crate::model::equilibrium_density;

use super::{expect_kind, Axis, Check, ExperimentRecord, Outcome};

/// Squared distances below this are quadrature noise.
pub const W2_SQ_FLOOR: f64 = 1e-10;
/// Allowed excess of the per-step ratio over `1/K`.
pub const W2_RATIO_SLACK: f64 = 1e-3;

/// Squared Wasserstein distance to equilibrium along the density iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct W2Contraction {
    pub k: usize,
    pub w2: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn run_w2_contraction(cfg: &ExperimentConfig) -> Result<W2Contraction> {
    expect_kind(cfg, ExperimentKind::W2Contraction)?;
    let (k, sigma) = (cfg.params.k, cfg.params.sigma);
    let rho0 = cfg.init.density(&cfg.grid)?;
    rho0.check_tails(TAIL_THRESHOLD)?;
    let inf = equilibrium_density(&cfg.grid, k, sigma)?;
    let seq = iterate(&rho0, k, sigma, cfg.steps as usize)?;
    let w2 = seq.iter().map(|r| w2_grid(r, &inf)).collect::<Result<Vec<_>>>()?;
    let variance = seq.iter().map(|r| r.variance()).collect();
    Ok(W2Contraction { k, w2, variance })
}

impl W2Contraction {
    pub fn w2_squared(&self) -> Vec<f64> {
        self.w2.iter().map(|w| w * w).collect()
    }

    /// Ratios `W2^2(n+1) / W2^2(n)` while `W2^2(n)` is above the floor.
    pub fn ratios(&self) -> Vec<f64> {
        self.w2_squared()
            .windows(2)
            .take_while(|w| w[0] >= W2_SQ_FLOOR)
            .map(|w| w[1] / w[0])
            .collect()
    }

    pub fn checks(&self) -> Vec<Check> {
        let ratios = self.ratios();
        let worst = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vec![Check::at_most(
            "w2^2 ratio <= 1/K + 1e-3 above the floor",
            worst,
            1.0 / self.k as f64 + W2_RATIO_SLACK,
            format!("{} ratios checked", ratios.len()),
        )]
    }

    pub fn outcome(&self) -> Outcome {
        let sq = self.w2_squared();
        let mut records = Vec::new();
        for (n, v) in sq.iter().enumerate() {
            let at = n as f64;
            records.push(ExperimentRecord::new(at, "w2_sq", *v, 0, 0));
            records.push(ExperimentRecord::new(at, "variance", self.variance[n], 0, 0));
            if n > 0 {
                records.push(ExperimentRecord::new(at, "w2_sq_ratio", v / sq[n - 1], 0, 0));
            }
        }
        Outcome {
            experiment: ExperimentKind::W2Contraction,
            axis: Axis::Step,
            records,
            checks: self.checks(),
            tables: vec![],
            values: Default::default(),
        }
    }
}
