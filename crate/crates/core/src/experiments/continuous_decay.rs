use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::continuous::simulate;
use crate::density::{evolve_continuous_with, GridDensity, TAIL_THRESHOLD};
use crate::error::{KavgError, Result};
use crate::metrics::kl_divergence;
use crate::model::{equilibrium_density, equilibrium_variance, ModelParams};
use crate::rng::RandomSource;
use crate::stats::variance_with_se;

use super::{expect_kind, Axis, Check, ExperimentRecord, Outcome};

/// Euler slack factor on the decay bound, times `lambda dt`.
pub const EULER_SLACK: f64 = 5.0;

/// Relative entropy along the continuous-time density evolution, plus a
/// particle simulation of the same model.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousDecay {
    pub lambda: f64,
    pub dt: f64,
    pub k: usize,
    pub times: Vec<f64>,
    pub kl: Vec<f64>,
    /// `D(0) exp(-lambda (1 - 1/K) t)`.
    pub bound: Vec<f64>,
    pub equilibrium_variance: f64,
    /// Per seed: snapshot times and `(variance, SE)` of the first coordinate.
    pub particles: Vec<(u64, Vec<f64>, Vec<(f64, f64)>)>,
}

/// KL to equilibrium at every Euler step.
fn kl_series(
    rho0: &GridDensity,
    inf: &GridDensity,
    p: &ModelParams,
    t_end: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut times = Vec::new();
    let mut kl = Vec::new();
    evolve_continuous_with(rho0, p.k, p.sigma, p.lambda, t_end, dt, |t, rho| {
        times.push(t);
        kl.push(kl_divergence(rho, inf)?);
        Ok(())
    })?;
    Ok((times, kl))
}

pub fn run_continuous_decay(cfg: &ExperimentConfig) -> Result<ContinuousDecay> {
    expect_kind(cfg, ExperimentKind::ContinuousDecay)?;
    let p = &cfg.params;
    let rho0 = cfg.init.density(&cfg.grid)?;
    rho0.check_tails(TAIL_THRESHOLD)?;
    let inf = equilibrium_density(&cfg.grid, p.k, p.sigma)?;
    let (times, kl) = kl_series(&rho0, &inf, p, cfg.t_end, cfg.dt)?;
    let rate = p.lambda * (1.0 - 1.0 / p.k as f64);
    let bound = times.iter().map(|t| kl[0] * (-rate * t).exp()).collect();

    let mc_params = ModelParams {
        n: cfg.mc_n,
        ..p.clone()
    };
    let snap_times: Vec<f64> = {
        let whole = cfg.mc_t_end.floor() as usize;
        let mut ts: Vec<f64> = (0..=whole).map(|t| t as f64).collect();
        if cfg.mc_t_end > whole as f64 {
            ts.push(cfg.mc_t_end);
        }
        ts
    };
    let particles = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let mut rng = RandomSource::new(seed, 0);
            let ens0 = cfg.init.sample_ensemble(mc_params.n, mc_params.d, &mut rng)?;
            let (snaps, _) = simulate(&ens0, &mc_params, cfg.mc_t_end, &mut rng, &snap_times)?;
            let stats = snaps.iter().map(|e| variance_with_se(&e.coordinate(0))).collect();
            Ok((seed, snap_times.clone(), stats))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ContinuousDecay {
        lambda: p.lambda,
        dt: cfg.dt,
        k: p.k,
        times,
        kl,
        bound,
        equilibrium_variance: equilibrium_variance(p.k, p.sigma)?,
        particles,
    })
}

/// First-order convergence check of the Euler scheme: with `D_h` the KL
/// series at step `h`, returns `max|D_dt - D_{dt/2}| / max|D_{dt/2} - D_{dt/4}|`
/// over the common times (about 2 for a first-order method).
pub fn richardson_ratio(rho0: &GridDensity, p: &ModelParams, t_end: f64, dt: f64) -> Result<f64> {
    let inf = equilibrium_density(rho0.grid(), p.k, p.sigma)?;
    let (_, d1) = kl_series(rho0, &inf, p, t_end, dt)?;
    let (_, d2) = kl_series(rho0, &inf, p, t_end, dt / 2.0)?;
    let (_, d4) = kl_series(rho0, &inf, p, t_end, dt / 4.0)?;
    if d2.len() != 2 * d1.len() - 1 || d4.len() != 2 * d2.len() - 1 {
        return Err(KavgError::invalid("t_end must be a multiple of dt"));
    }
    let coarse = (0..d1.len()).map(|m| (d1[m] - d2[2 * m]).abs()).fold(0.0, f64::max);
    let fine = (0..d1.len()).map(|m| (d2[2 * m] - d4[4 * m]).abs()).fold(0.0, f64::max);
    Ok(coarse / fine)
}

impl ContinuousDecay {
    /// Largest `D(t) / bound(t)`.
    pub fn worst_bound_ratio(&self) -> f64 {
        self.kl
            .iter()
            .zip(&self.bound)
            .map(|(d, b)| {
                if *b > 0.0 {
                    d / b
                } else if *d > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn checks(&self) -> Vec<Check> {
        let slack = 1.0 + EULER_SLACK * self.lambda * self.dt;
        let mut checks = vec![Check::at_most(
            "kl below the decay bound with Euler slack",
            self.worst_bound_ratio(),
            slack,
            format!("max D(t)/bound(t) over {} times", self.times.len()),
        )];
        for (seed, times, stats) in &self.particles {
            let (v, se) = *stats.last().expect("at least the initial snapshot");
            let t = times.last().copied().unwrap_or(0.0);
            checks.push(Check::at_most(
                &format!("seed {seed}: particle variance at t = {t} within 3 SE of equilibrium"),
                (v - self.equilibrium_variance).abs() / se,
                3.0,
                format!("variance {v} +- {se} vs {}", self.equilibrium_variance),
            ));
        }
        checks
    }

    pub fn outcome(&self) -> Outcome {
        let mut records = Vec::new();
        for (i, t) in self.times.iter().enumerate() {
            records.push(ExperimentRecord::new(*t, "kl", self.kl[i], 0, 0));
            records.push(ExperimentRecord::new(*t, "kl_bound", self.bound[i], 0, 0));
        }
        for (seed, times, stats) in &self.particles {
            for (t, (v, se)) in times.iter().zip(stats) {
                records.push(ExperimentRecord::new(*t, "particle_variance", *v, *seed, 0));
                records.push(ExperimentRecord::new(*t, "particle_variance_se", *se, *seed, 0));
            }
        }
        Outcome {
            experiment: ExperimentKind::ContinuousDecay,
            axis: Axis::Time,
            records,
            checks: self.checks(),
            tables: vec![],
            values: Default::default(),
        }
    }
}
