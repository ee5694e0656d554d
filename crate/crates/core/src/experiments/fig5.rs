use crate::config::{ExperimentConfig, ExperimentKind};
use crate::density::iterate;
use crate::error::Result;
use crate::metrics::kl_divergence;
use crate::model::equilibrium_density;

use super::{expect_kind, Axis, Check, ExperimentRecord, Outcome};

/// Relative entropy is considered converged below this level.
pub const KL_FLOOR: f64 = 1e-12;

/// Relative-entropy decay of the density iteration towards the Gaussian
/// equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig5Entropy {
    pub k: usize,
    /// `D_KL(rho^n || rho_inf)` for `n = 0..=steps`.
    pub kl: Vec<f64>,
    /// `D^0 / K^n`.
    pub bound: Vec<f64>,
}

pub fn run_fig5_entropy(cfg: &ExperimentConfig) -> Result<Fig5Entropy> {
    expect_kind(cfg, ExperimentKind::Fig5Entropy)?;
    let (k, sigma) = (cfg.params.k, cfg.params.sigma);
    let rho0 = cfg.init.density(&cfg.grid)?;
    rho0.check_tails(crate::density::TAIL_THRESHOLD)?;
    let inf = equilibrium_density(&cfg.grid, k, sigma)?;
    let kl = iterate(&rho0, k, sigma, cfg.steps as usize)?
        .iter()
        .map(|r| kl_divergence(r, &inf))
        .collect::<Result<Vec<_>>>()?;
    let bound = (0..kl.len()).map(|n| kl[0] / (k as f64).powi(n as i32)).collect();
    Ok(Fig5Entropy { k, kl, bound })
}

impl Fig5Entropy {
    /// `D^{n+1} / D^n` for every step taken while `D^n >= floor`.
    pub fn ratios_above(&self, floor: f64) -> Vec<f64> {
        self.kl
            .windows(2)
            .take_while(|w| w[0] >= floor)
            .map(|w| w[1] / w[0])
            .collect()
    }

    /// First step with `D^n < floor`.
    pub fn first_below(&self, floor: f64) -> Option<usize> {
        self.kl.iter().position(|&d| d < floor)
    }

    pub fn checks(&self) -> Vec<Check> {
        let gamma = 1.0 / self.k as f64;
        let ratios = self.ratios_above(KL_FLOOR);
        let worst = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut checks = vec![Check::at_most(
            "kl ratio <= 1/K above the floor",
            worst,
            gamma,
            format!("{} ratios checked", ratios.len()),
        )];
        let floor = match self.first_below(KL_FLOOR) {
            Some(n) => {
                let tail = self.kl[n..].iter().copied().fold(0.0, f64::max);
                Check::at_most(
                    "kl settles at the floor",
                    tail,
                    10.0 * KL_FLOOR,
                    format!("below {KL_FLOOR:e} from step {n}; largest later value {tail:e}"),
                )
            }
            None => Check::flag("kl settles at the floor", false, format!("never below {KL_FLOOR:e}")),
        };
        checks.push(floor);
        checks
    }

    pub fn outcome(&self) -> Outcome {
        let mut records = Vec::new();
        for (n, (d, b)) in self.kl.iter().zip(&self.bound).enumerate() {
            records.push(ExperimentRecord::new(n as f64, "kl", *d, 0, 0));
            records.push(ExperimentRecord::new(n as f64, "kl_bound", *b, 0, 0));
            if n > 0 {
                records.push(ExperimentRecord::new(n as f64, "kl_ratio", d / self.kl[n - 1], 0, 0));
            }
        }
        Outcome {
            experiment: ExperimentKind::Fig5Entropy,
            axis: Axis::Step,
            records,
            checks: self.checks(),
            tables: vec![],
            values: Default::default(),
        }
    }
}
