//! Experiment runners.
//!
//! Every runner returns a typed result that can be turned into an
//! [`Outcome`]: a long-format series, a list of named checks and optional
//! extra tables. [`write_outcome`] stores them as
//!
//! - `<experiment>.csv`: `# kavg-series v1 ...` comment line, then
//!   `step|time|N,metric,value,seed,replica` rows,
//! - `<experiment>.summary.json`: the checks and derived values,
//! - `<experiment>.manifest.json`: config hash, seeds, crate version and the
//!   canonical config,
//! - `<experiment>.<table>.csv` for each extra table.
//!
//! Runs are deterministic: the same config gives byte-identical files.

mod continuous_decay;
mod diffusion;
mod fig2;
mod fig4;
mod fig5;
mod poc;
mod w2;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{KavgError, Result};

pub use continuous_decay::{richardson_ratio, run_continuous_decay, ContinuousDecay};
pub use diffusion::{run_com_diffusion, ComDiffusion};
pub use fig2::{run_fig2_histogram, Fig2Histogram, Fig2Seed};
pub use fig4::{run_fig4_density, Fig4Density};
pub use fig5::{run_fig5_entropy, Fig5Entropy};
pub use poc::{fit_rate, run_poc_rate, PocPoint, PocRate};
pub use w2::{run_w2_contraction, W2Contraction};

/// Version tag of the CSV series schema.
pub const SERIES_VERSION: u32 = 1;

/// Independent variable of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Step,
    Time,
    /// Population size `N`.
    Population,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Step => "step",
            Axis::Time => "time",
            Axis::Population => "N",
        }
    }
}

/// One row of an experiment series.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub at: f64,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
    pub replica: u64,
}

impl ExperimentRecord {
    pub fn new(at: f64, metric: &str, value: f64, seed: u64, replica: u64) -> Self {
        Self {
            at,
            metric: metric.to_string(),
            value,
            seed,
            replica,
        }
    }
}

/// A named pass/fail check with the measured value and its threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
        }
    }
}

/// An extra table: header plus rows of already formatted fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Everything a run writes to disk.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub experiment: ExperimentKind,
    pub axis: Axis,
    pub records: Vec<ExperimentRecord>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Derived scalars (fitted slopes and the like) for the summary.
    pub values: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Run whatever experiment `cfg` names.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    use ExperimentKind::*;
    Ok(match cfg.experiment {
        Fig2Histogram => run_fig2_histogram(cfg)?.outcome(cfg),
        Fig4Density => run_fig4_density(cfg)?.outcome(),
        Fig5Entropy => run_fig5_entropy(cfg)?.outcome(),
        PocRate => run_poc_rate(cfg)?.outcome(),
        W2Contraction => run_w2_contraction(cfg)?.outcome(),
        ComDiffusion => run_com_diffusion(cfg)?.outcome(),
        ContinuousDecay => run_continuous_decay(cfg)?.outcome(),
    })
}

pub(crate) fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment == kind {
        Ok(())
    } else {
        Err(KavgError::Config(format!(
            "config is for {}, not {kind}",
            cfg.experiment
        )))
    }
}

/// Shortest round-trip rendering used in all CSV output.
pub(crate) fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_series<W: Write>(mut out: W, outcome: &Outcome, cfg: &ExperimentConfig) -> Result<()> {
    writeln!(
        out,
        "# kavg-series v{SERIES_VERSION} experiment={} config_sha256={}",
        outcome.experiment,
        cfg.hash()
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([outcome.axis.name(), "metric", "value", "seed", "replica"])?;
    for r in &outcome.records {
        let at = match outcome.axis {
            Axis::Time => num(r.at),
            Axis::Step | Axis::Population => format!("{}", r.at as u64),
        };
        w.write_record([
            at,
            r.metric.clone(),
            num(r.value),
            r.seed.to_string(),
            r.replica.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_table<W: Write>(mut out: W, experiment: ExperimentKind, table: &Table) -> Result<()> {
    writeln!(
        out,
        "# kavg-table v{SERIES_VERSION} experiment={experiment} table={}",
        table.name
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: String,
    passed: bool,
    checks: &'a [Check],
    values: &'a BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Manifest {
    experiment: String,
    config_sha256: String,
    seeds: Vec<u64>,
    version: String,
    config: String,
}

/// Write all files of `outcome` into `dir`, returning their paths.
pub fn write_outcome(outcome: &Outcome, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = outcome.experiment.name();
    let mut written = Vec::new();

    let path = dir.join(format!("{stem}.csv"));
    write_series(fs::File::create(&path)?, outcome, cfg)?;
    written.push(path);

    for table in &outcome.tables {
        let path = dir.join(format!("{stem}.{}.csv", table.name));
        write_table(fs::File::create(&path)?, outcome.experiment, table)?;
        written.push(path);
    }

    let summary = Summary {
        experiment: stem.to_string(),
        passed: outcome.passed(),
        checks: &outcome.checks,
        values: &outcome.values,
    };
    let path = dir.join(format!("{stem}.summary.json"));
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    written.push(path);

    let manifest = Manifest {
        experiment: stem.to_string(),
        config_sha256: cfg.hash(),
        seeds: cfg.seeds.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.to_toml(),
    };
    let path = dir.join(format!("{stem}.manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    written.push(path);
    Ok(written)
}
