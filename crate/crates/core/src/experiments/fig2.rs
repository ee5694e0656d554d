use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::metrics::w2_empirical_vs_grid;
use crate::model::{equilibrium_density, equilibrium_variance};
use crate::particles::run_with;
use crate::rng::RandomSource;
use crate::stats::{mean, variance_with_se};

use super::{expect_kind, num, Axis, Check, ExperimentRecord, Outcome, Table};

/// Histogram bin width of the exported table.
pub const FIG2_BIN_WIDTH: f64 = 0.01;
/// Largest accepted W2 distance between the final ensemble and equilibrium.
pub const FIG2_W2_THRESHOLD: f64 = 0.01;

/// Final state and summary of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Seed {
    pub seed: u64,
    /// First coordinate of every particle after the last step.
    pub final_positions: Vec<f64>,
    pub variance: f64,
    pub variance_se: f64,
    pub center: f64,
    /// W2 of the mean-centered final ensemble against equilibrium.
    pub w2_centered: f64,
    /// Same without centering.
    pub w2_raw: f64,
    /// `(step, mean, variance)` every `record_every` steps.
    pub series: Vec<(u64, f64, f64)>,
}

/// Long particle run relaxing to the Gaussian equilibrium, one per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Histogram {
    pub equilibrium_variance: f64,
    pub seeds: Vec<Fig2Seed>,
    /// Equilibrium density on the configured grid, `(x, value)`.
    pub equilibrium_curve: Vec<(f64, f64)>,
}

pub fn run_fig2_histogram(cfg: &ExperimentConfig) -> Result<Fig2Histogram> {
    expect_kind(cfg, ExperimentKind::Fig2Histogram)?;
    let p = &cfg.params;
    let target = equilibrium_variance(p.k, p.sigma)?;
    let inf = equilibrium_density(&cfg.grid, p.k, p.sigma)?;
    let seeds = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Fig2Seed> {
            let mut rng = RandomSource::new(seed, 0);
            let ens0 = cfg.init.sample_ensemble(p.n, p.d, &mut rng)?;
            let mut series = Vec::new();
            let snaps = run_with(&ens0, p, cfg.steps, &rng, cfg.steps.max(1), |e| {
                if e.step() % cfg.record_every == 0 || e.step() == cfg.steps {
                    let xs = e.coordinate(0);
                    series.push((e.step(), mean(&xs), variance_with_se(&xs).0));
                }
                Ok(())
            })?;
            let xs = snaps.last().expect("run keeps the final state").coordinate(0);
            let (variance, variance_se) = variance_with_se(&xs);
            let center = mean(&xs);
            let centered: Vec<f64> = xs.iter().map(|x| x - center).collect();
            Ok(Fig2Seed {
                seed,
                w2_centered: w2_empirical_vs_grid(&centered, &inf)?,
                w2_raw: w2_empirical_vs_grid(&xs, &inf)?,
                final_positions: xs,
                variance,
                variance_se,
                center,
                series,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = inf.grid();
    let equilibrium_curve = (0..grid.points()).map(|j| (grid.node(j), inf.values()[j])).collect();
    Ok(Fig2Histogram {
        equilibrium_variance: target,
        seeds,
        equilibrium_curve,
    })
}

impl Fig2Histogram {
    pub fn checks(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        for s in &self.seeds {
            let z = (s.variance - self.equilibrium_variance).abs() / s.variance_se;
            checks.push(Check::at_most(
                &format!("seed {}: final variance within 3 SE of equilibrium", s.seed),
                z,
                3.0,
                format!(
                    "variance {} +- {} vs {}",
                    s.variance, s.variance_se, self.equilibrium_variance
                ),
            ));
            checks.push(Check::at_most(
                &format!("seed {}: W2 to equilibrium", s.seed),
                s.w2_centered,
                FIG2_W2_THRESHOLD,
                format!("mean-centered; center {} (uncentered W2 {})", s.center, s.w2_raw),
            ));
        }
        checks
    }

    pub fn outcome(&self, cfg: &ExperimentConfig) -> Outcome {
        let mut records = Vec::new();
        for s in &self.seeds {
            for &(step, m, v) in &s.series {
                records.push(ExperimentRecord::new(step as f64, "mean", m, s.seed, 0));
                records.push(ExperimentRecord::new(step as f64, "variance", v, s.seed, 0));
            }
            let last = cfg.steps as f64;
            records.push(ExperimentRecord::new(last, "w2_centered", s.w2_centered, s.seed, 0));
            records.push(ExperimentRecord::new(last, "w2_raw", s.w2_raw, s.seed, 0));
        }

        let mut hist_rows = Vec::new();
        for s in &self.seeds {
            let h = FIG2_BIN_WIDTH;
            let ens = crate::particles::Ensemble::from_points(s.final_positions.clone()).expect("positions are finite");
            let hist = ens.empirical_measure().histogram(0, h).expect("positive bin width");
            for (b, w) in hist.weights.iter().enumerate() {
                let left = hist.start + b as f64 * h;
                hist_rows.push(vec![s.seed.to_string(), num(left), num(left + h), num(w / h)]);
            }
        }
        let curve_rows = self
            .equilibrium_curve
            .iter()
            .map(|(x, v)| vec![num(*x), num(*v)])
            .collect();
        Outcome {
            experiment: ExperimentKind::Fig2Histogram,
            axis: Axis::Step,
            records,
            checks: self.checks(),
            tables: vec![
                Table {
                    name: "histogram".into(),
                    header: ["seed", "bin_left", "bin_right", "density"].map(String::from).to_vec(),
                    rows: hist_rows,
                },
                Table {
                    name: "equilibrium".into(),
                    header: vec!["x".into(), "value".into()],
                    rows: curve_rows,
                },
            ],
            values: Default::default(),
        }
    }
}
