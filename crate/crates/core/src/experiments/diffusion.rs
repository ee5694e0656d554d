use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::particles::{center_of_mass_increments, run};
use crate::rng::RandomSource;
use crate::stats::{variance_with_se, MeanEstimate};

use super::{expect_kind, Axis, Check, ExperimentRecord, Outcome};

/// Center-of-mass increments of many independent replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct ComDiffusion {
    pub n: usize,
    pub sigma: f64,
    /// `(seed, replica, increments)`; one `d`-vector per step.
    pub runs: Vec<(u64, u64, Vec<Vec<f64>>)>,
}

pub fn run_com_diffusion(cfg: &ExperimentConfig) -> Result<ComDiffusion> {
    expect_kind(cfg, ExperimentKind::ComDiffusion)?;
    let p = &cfg.params;
    let jobs: Vec<(u64, u64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| (0..cfg.replicas as u64).map(move |r| (s, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, replica)| -> Result<_> {
            let mut rng = RandomSource::new(seed, replica);
            let ens0 = cfg.init.sample_ensemble(p.n, p.d, &mut rng)?;
            let traj = run(&ens0, p, cfg.steps, &rng, 1)?;
            Ok((seed, replica, center_of_mass_increments(&traj)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComDiffusion {
        n: p.n,
        sigma: p.sigma,
        runs,
    })
}

impl ComDiffusion {
    /// All increments of coordinate `c`, pooled over replicas and steps.
    pub fn pooled(&self, c: usize) -> Vec<f64> {
        self.runs
            .iter()
            .flat_map(|(_, _, inc)| inc.iter().map(move |v| v[c]))
            .collect()
    }

    pub fn dimension(&self) -> usize {
        self.runs.first().and_then(|r| r.2.first()).map_or(0, Vec::len)
    }

    pub fn checks(&self) -> Vec<Check> {
        let floor = self.sigma * self.sigma / self.n as f64;
        let mut checks = Vec::new();
        for c in 0..self.dimension() {
            let xs = self.pooled(c);
            let m = MeanEstimate::from_samples(&xs);
            checks.push(Check::at_most(
                &format!("coordinate {c}: mean increment within 3 SE of 0"),
                m.mean.abs() / m.se,
                3.0,
                format!("mean {:e} +- {:e} over {} increments", m.mean, m.se, m.count),
            ));
            let (v, se) = variance_with_se(&xs);
            checks.push(Check::at_least(
                &format!("coordinate {c}: increment variance >= sigma^2/N - 3 SE"),
                v,
                floor - 3.0 * se,
                format!("variance {v:e} +- {se:e}, sigma^2/N = {floor:e}"),
            ));
        }
        checks
    }

    pub fn outcome(&self) -> Outcome {
        let mut records = Vec::new();
        for (seed, replica, inc) in &self.runs {
            for (n, v) in inc.iter().enumerate() {
                for (c, x) in v.iter().enumerate() {
                    let metric = format!("increment{c}");
                    records.push(ExperimentRecord::new((n + 1) as f64, &metric, *x, *seed, *replica));
                }
            }
        }
        Outcome {
            experiment: ExperimentKind::ComDiffusion,
            axis: Axis::Step,
            records,
            checks: self.checks(),
            tables: vec![],
            values: Default::default(),
        }
    }
}
