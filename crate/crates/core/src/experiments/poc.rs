use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::density::{iterate, TAIL_THRESHOLD};
use crate::error::{KavgError, Result};
use crate::metrics::{w2_empirical_vs_grid, TestFunction};
use crate::model::ModelParams;
use crate::particles::run;
use crate::rng::RandomSource;
use crate::stats::{linear_fit, MeanEstimate};

use super::{expect_kind, Axis, Check, ExperimentRecord, Outcome};

/// Accepted range of the fitted log-log slope of the mean W2 error.
pub const POC_SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);
/// Required share of seed pairs where the largest population beats the smallest.
pub const POC_DOMINANCE: f64 = 0.9;

/// Errors of one `(N, seed)` run against the mean-field density.
#[derive(Clone, Debug, PartialEq)]
pub struct PocPoint {
    pub n: usize,
    pub seed: u64,
    pub w2: f64,
    /// `|<rho_emp - rho, phi>|` for each of [`TestFunction::ALL`].
    pub gaps: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct PocRate {
    pub n_values: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Indexed `[n_index][seed_index]`.
    pub points: Vec<Vec<PocPoint>>,
}

/// Slope and intercept of `ln err` against `ln n`.
pub fn fit_rate(ns: &[usize], errs: &[f64]) -> Result<(f64, f64)> {
    if ns.len() < 3 || ns.len() != errs.len() {
        return Err(KavgError::invalid(format!(
            "rate fit needs at least 3 matching points (got {} sizes, {} errors)",
            ns.len(),
            errs.len()
        )));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    Ok(linear_fit(&xs, &ys))
}

pub fn run_poc_rate(cfg: &ExperimentConfig) -> Result<PocRate> {
    expect_kind(cfg, ExperimentKind::PocRate)?;
    if cfg.n_values.len() < 3 {
        return Err(KavgError::Config(format!(
            "[poc-rate] at least 3 population sizes are needed (got {})",
            cfg.n_values.len()
        )));
    }
    let p = &cfg.params;
    let rho0 = cfg.init.density(&cfg.grid)?;
    rho0.check_tails(TAIL_THRESHOLD)?;
    let rho = iterate(&rho0, p.k, p.sigma, cfg.steps as usize)?
        .pop()
        .expect("iterate returns the initial density at least");

    let jobs: Vec<(usize, usize, u64)> = cfg
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| cfg.seeds.iter().map(move |&s| (i, n, s)))
        .collect();
    let flat = jobs
        .par_iter()
        .map(|&(i, n, seed)| -> Result<PocPoint> {
            let params = ModelParams { n, ..p.clone() };
            let mut rng = RandomSource::new(seed, i as u64);
            let ens0 = cfg.init.sample_ensemble(n, params.d, &mut rng)?;
            let last = run(&ens0, &params, cfg.steps, &rng, cfg.steps.max(1))?
                .pop()
                .expect("run keeps the final state");
            let xs = last.coordinate(0);
            let gaps = TestFunction::ALL.map(|f| f.gap(&xs, &rho));
            Ok(PocPoint {
                n,
                seed,
                w2: w2_empirical_vs_grid(&xs, &rho)?,
                gaps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points = flat.chunks(cfg.seeds.len()).map(|c| c.to_vec()).collect();
    Ok(PocRate {
        n_values: cfg.n_values.clone(),
        seeds: cfg.seeds.clone(),
        points,
    })
}

impl PocRate {
    pub fn mean_w2(&self) -> Vec<MeanEstimate> {
        self.points
            .iter()
            .map(|row| MeanEstimate::from_samples(&row.iter().map(|p| p.w2).collect::<Vec<_>>()))
            .collect()
    }

    pub fn mean_gap(&self, f: usize) -> Vec<f64> {
        self.points
            .iter()
            .map(|row| row.iter().map(|p| p.gaps[f]).sum::<f64>() / row.len() as f64)
            .collect()
    }

    pub fn w2_slope(&self) -> Result<f64> {
        let errs: Vec<f64> = self.mean_w2().iter().map(|m| m.mean).collect();
        Ok(fit_rate(&self.n_values, &errs)?.0)
    }

    /// Share of `(seed_a, seed_b)` pairs whose `tanh` error at the largest
    /// population is below the error at the smallest one.
    pub fn tanh_dominance(&self) -> f64 {
        let (lo, hi) = self.extreme_rows();
        let mut wins = 0usize;
        for a in lo {
            for b in hi {
                if b.gaps[0] < a.gaps[0] {
                    wins += 1;
                }
            }
        }
        wins as f64 / (lo.len() * hi.len()) as f64
    }

    fn extreme_rows(&self) -> (&[PocPoint], &[PocPoint]) {
        let by_n = |pick: fn(usize, usize) -> bool| {
            let mut best = 0;
            for (i, &n) in self.n_values.iter().enumerate() {
                if pick(n, self.n_values[best]) {
                    best = i;
                }
            }
            &self.points[best][..]
        };
        (by_n(|a, b| a < b), by_n(|a, b| a > b))
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        match self.w2_slope() {
            Ok(slope) => {
                let (lo, hi) = POC_SLOPE_RANGE;
                checks.push(Check {
                    name: "fitted W2 slope in [-0.65, -0.35]".into(),
                    passed: (lo..=hi).contains(&slope),
                    value: slope,
                    threshold: hi,
                    detail: format!("{} seeds per population size", self.seeds.len()),
                });
            }
            Err(e) => checks.push(Check::flag("fitted W2 slope in [-0.65, -0.35]", false, e.to_string())),
        }
        checks.push(Check::at_least(
            "tanh error shrinks from smallest to largest N",
            self.tanh_dominance(),
            POC_DOMINANCE,
            "share of cross seed pairs",
        ));
        // the spread of the averaged error narrows as more seeds enter the mean
        let few = (self.seeds.len() / 4).max(2).min(self.seeds.len());
        let narrows = self.points.iter().all(|row| {
            let w: Vec<f64> = row.iter().map(|p| p.w2).collect();
            MeanEstimate::from_samples(&w).se <= MeanEstimate::from_samples(&w[..few]).se || row.len() == few
        });
        checks.push(Check::flag(
            "seed averaging reduces the standard error",
            narrows,
            format!("first {few} seeds vs all"),
        ));
        checks
    }

    pub fn outcome(&self) -> Outcome {
        let mut records = Vec::new();
        for row in &self.points {
            for (r, p) in row.iter().enumerate() {
                let at = p.n as f64;
                records.push(ExperimentRecord::new(at, "w2", p.w2, p.seed, r as u64));
                for (f, g) in TestFunction::ALL.iter().zip(p.gaps) {
                    records.push(ExperimentRecord::new(
                        at,
                        &format!("gap_{}", f.name()),
                        g,
                        p.seed,
                        r as u64,
                    ));
                }
            }
        }
        for (n, m) in self.n_values.iter().zip(self.mean_w2()) {
            records.push(ExperimentRecord::new(*n as f64, "mean_w2", m.mean, 0, 0));
            records.push(ExperimentRecord::new(*n as f64, "mean_w2_se", m.se, 0, 0));
        }
        let mut values = std::collections::BTreeMap::new();
        if let Ok(slope) = self.w2_slope() {
            values.insert("w2_slope".to_string(), slope);
        }
        for (fi, f) in TestFunction::ALL.iter().enumerate() {
            if let Ok((slope, _)) = fit_rate(&self.n_values, &self.mean_gap(fi)) {
                values.insert(format!("gap_{}_slope", f.name()), slope);
            }
        }
        values.insert("tanh_dominance".to_string(), self.tanh_dominance());
        Outcome {
            experiment: ExperimentKind::PocRate,
            axis: Axis::Population,
            records,
            checks: self.checks(),
            tables: vec![],
            values,
        }
    }
}
