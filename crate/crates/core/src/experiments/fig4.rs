use crate::config::{ExperimentConfig, ExperimentKind};
use crate::density::{iterate, GridDensity, TAIL_THRESHOLD};
use crate::error::Result;
use crate::metrics::{kl_divergence, tv_distance, w2_grid};
use crate::model::equilibrium_density;

use super::{expect_kind, num, Axis, Check, ExperimentRecord, Outcome, Table};

/// `||rho^5 - rho_inf||_1` must stay below this.
pub const FIG4_L1_THRESHOLD: f64 = 5e-3;

/// Relaxation of the density iteration, with all iterates kept.
#[derive(Clone, Debug)]
pub struct Fig4Density {
    pub iterates: Vec<GridDensity>,
    pub equilibrium: GridDensity,
    pub l1: Vec<f64>,
    pub w2: Vec<f64>,
    pub kl: Vec<f64>,
}

pub fn run_fig4_density(cfg: &ExperimentConfig) -> Result<Fig4Density> {
    expect_kind(cfg, ExperimentKind::Fig4Density)?;
    let (k, sigma) = (cfg.params.k, cfg.params.sigma);
    let rho0 = cfg.init.density(&cfg.grid)?;
    rho0.check_tails(TAIL_THRESHOLD)?;
    let equilibrium = equilibrium_density(&cfg.grid, k, sigma)?;
    let iterates = iterate(&rho0, k, sigma, cfg.steps as usize)?;
    let mut l1 = Vec::new();
    let mut w2 = Vec::new();
    let mut kl = Vec::new();
    for r in &iterates {
        l1.push(tv_distance(r, &equilibrium)?);
        w2.push(w2_grid(r, &equilibrium)?);
        kl.push(kl_divergence(r, &equilibrium)?);
    }
    Ok(Fig4Density {
        iterates,
        equilibrium,
        l1,
        w2,
        kl,
    })
}

impl Fig4Density {
    pub fn checks(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        if let Some(&v) = self.l1.get(3) {
            checks.push(Check::at_least(
                "l1 distance at step 3 (reported)",
                v,
                0.0,
                "informational",
            ));
        }
        match self.l1.get(5) {
            Some(&v) => checks.push(Check::at_most(
                "l1 distance at step 5",
                v,
                FIG4_L1_THRESHOLD,
                "||rho^5 - rho_inf||_1",
            )),
            None => checks.push(Check::flag("l1 distance at step 5", false, "fewer than 5 steps run")),
        }
        checks
    }

    pub fn outcome(&self) -> Outcome {
        let mut records = Vec::new();
        for n in 0..self.iterates.len() {
            let at = n as f64;
            records.push(ExperimentRecord::new(at, "l1", self.l1[n], 0, 0));
            records.push(ExperimentRecord::new(at, "w2", self.w2[n], 0, 0));
            records.push(ExperimentRecord::new(at, "kl", self.kl[n], 0, 0));
            records.push(ExperimentRecord::new(at, "variance", self.iterates[n].variance(), 0, 0));
        }
        let mut header = vec!["x".to_string()];
        header.extend((0..self.iterates.len()).map(|n| format!("rho{n}")));
        header.push("rho_inf".into());
        let grid = self.equilibrium.grid();
        let rows = (0..grid.points())
            .map(|j| {
                let mut row = vec![num(grid.node(j))];
                row.extend(self.iterates.iter().map(|r| num(r.values()[j])));
                row.push(num(self.equilibrium.values()[j]));
                row
            })
            .collect();
        Outcome {
            experiment: ExperimentKind::Fig4Density,
            axis: Axis::Step,
            records,
            checks: self.checks(),
            tables: vec![Table {
                name: "profiles".into(),
                header,
                rows,
            }],
            values: Default::default(),
        }
    }
}
