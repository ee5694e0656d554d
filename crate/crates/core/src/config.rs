//! Experiment configuration.
//!
//! A config file is TOML with one section per experiment, named after it:
//!
//! ```toml
//! [fig5-entropy]
//! K = 5
//! sigma = 0.1
//! init = "laplace(1)"
//! grid_half_width = 32.0
//! grid_points = 65536
//! steps = 15
//! seeds = [1]
//! output_dir = "out"
//! ```
//!
//! Keys left out take the defaults of [`ExperimentConfig::defaults`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::GridSpec;
use crate::error::{KavgError, Result};
use crate::init::InitialCondition;
use crate::model::{ModelParams, NeighborRule, TotalRateMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fig2Histogram,
    Fig4Density,
    Fig5Entropy,
    PocRate,
    W2Contraction,
    ComDiffusion,
    ContinuousDecay,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Fig2Histogram,
        Self::Fig4Density,
        Self::Fig5Entropy,
        Self::PocRate,
        Self::W2Contraction,
        Self::ComDiffusion,
        Self::ContinuousDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig2Histogram => "fig2-histogram",
            Self::Fig4Density => "fig4-density",
            Self::Fig5Entropy => "fig5-entropy",
            Self::PocRate => "poc-rate",
            Self::W2Contraction => "w2-contraction",
            Self::ComDiffusion => "com-diffusion",
            Self::ContinuousDecay => "continuous-decay",
        }
    }

    /// Whether the experiment evolves a grid density.
    pub fn uses_grid(self) -> bool {
        !matches!(self, Self::Fig2Histogram | Self::ComDiffusion)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = KavgError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| KavgError::Config(format!("unknown experiment {s:?}")))
    }
}

/// `seeds = [1, 2, 3]` or `seeds = { first = 1, count = 1000 }`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Seeds {
    List(Vec<u64>),
    Range { first: u64, count: u64 },
}

impl Seeds {
    fn expand(self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v,
            Seeds::Range { first, count } => (first..first + count).collect(),
        }
    }
}

/// One section as written in the file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSection {
    d: Option<usize>,
    #[serde(rename = "K", alias = "k")]
    k: Option<usize>,
    #[serde(rename = "N", alias = "n")]
    n: Option<usize>,
    sigma: Option<f64>,
    lambda: Option<f64>,
    neighbors: Option<NeighborRule>,
    total_rate_mode: Option<TotalRateMode>,
    grid_half_width: Option<f64>,
    grid_points: Option<usize>,
    seeds: Option<Seeds>,
    init: Option<InitialCondition>,
    output_dir: Option<PathBuf>,
    steps: Option<u64>,
    record_every: Option<u64>,
    t_end: Option<f64>,
    dt: Option<f64>,
    replicas: Option<usize>,
    n_values: Option<Vec<usize>>,
    mc_n: Option<usize>,
    mc_t_end: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub params: ModelParams,
    pub grid: GridSpec,
    pub seeds: Vec<u64>,
    pub init: InitialCondition,
    pub output_dir: PathBuf,
    /// Discrete steps (particles or density iterates).
    pub steps: u64,
    /// Cadence of per-step series rows for long particle runs.
    pub record_every: u64,
    /// Horizon of the continuous-time density evolution.
    pub t_end: f64,
    pub dt: f64,
    /// Independent replicas per seed.
    pub replicas: usize,
    /// Population sizes of the chaos-rate sweep.
    pub n_values: Vec<usize>,
    /// Population and horizon of the continuous-time particle run.
    pub mc_n: usize,
    pub mc_t_end: f64,
}

impl ExperimentConfig {
    /// Settings that reproduce the corresponding figure or claim.
    pub fn defaults(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let base = Self {
            experiment: kind,
            params: ModelParams {
                d: 1,
                k: 5,
                sigma: 0.1,
                lambda: 1.0,
                n: 5000,
                neighbors: NeighborRule::default(),
                rate_mode: TotalRateMode::default(),
            },
            grid: GridSpec::default(),
            seeds: vec![1],
            init: InitialCondition::Uniform { a: 1.0 },
            output_dir: PathBuf::from("out"),
            steps: 5,
            record_every: 1,
            t_end: 5.0,
            dt: 0.05,
            replicas: 1,
            n_values: vec![],
            mc_n: 5000,
            mc_t_end: 20.0,
        };
        match kind {
            Fig2Histogram => Self {
                seeds: vec![1, 2, 3, 4, 5],
                steps: 1000,
                record_every: 10,
                ..base
            },
            Fig4Density => base,
            Fig5Entropy => Self {
                grid: GridSpec::wide(),
                init: InitialCondition::Laplace { b: 1.0 },
                steps: 15,
                ..base
            },
            PocRate => Self {
                params: ModelParams {
                    k: 2,
                    ..base.params.clone()
                },
                seeds: (1..=1000).collect(),
                n_values: vec![200, 800, 3200, 12800],
                ..base
            },
            W2Contraction => Self {
                grid: GridSpec::wide(),
                init: InitialCondition::Laplace { b: 1.0 },
                steps: 25,
                ..base
            },
            ComDiffusion => Self {
                params: ModelParams {
                    k: 2,
                    n: 100,
                    ..base.params.clone()
                },
                steps: 50,
                replicas: 200,
                ..base
            },
            ContinuousDecay => Self {
                grid: GridSpec::wide(),
                init: InitialCondition::Laplace { b: 1.0 },
                ..base
            },
        }
    }

    fn from_raw(kind: ExperimentKind, raw: RawSection) -> Result<Self> {
        let mut cfg = Self::defaults(kind);
        let p = &mut cfg.params;
        p.d = raw.d.unwrap_or(p.d);
        p.k = raw.k.unwrap_or(p.k);
        p.n = raw.n.unwrap_or(p.n);
        p.sigma = raw.sigma.unwrap_or(p.sigma);
        p.lambda = raw.lambda.unwrap_or(p.lambda);
        p.neighbors = raw.neighbors.unwrap_or(p.neighbors);
        p.rate_mode = raw.total_rate_mode.unwrap_or(p.rate_mode);
        if raw.grid_half_width.is_some() || raw.grid_points.is_some() {
            cfg.grid = GridSpec::new(
                raw.grid_half_width.unwrap_or(cfg.grid.half_width()),
                raw.grid_points.unwrap_or(cfg.grid.points()),
            )
            .map_err(|e| KavgError::Config(format!("[{kind}] {e}")))?;
        }
        cfg.seeds = raw.seeds.map_or(cfg.seeds, Seeds::expand);
        cfg.init = raw.init.unwrap_or(cfg.init);
        cfg.output_dir = raw.output_dir.unwrap_or(cfg.output_dir);
        cfg.steps = raw.steps.unwrap_or(cfg.steps);
        cfg.record_every = raw.record_every.unwrap_or(cfg.record_every);
        cfg.t_end = raw.t_end.unwrap_or(cfg.t_end);
        cfg.dt = raw.dt.unwrap_or(cfg.dt);
        cfg.replicas = raw.replicas.unwrap_or(cfg.replicas);
        cfg.n_values = raw.n_values.unwrap_or(cfg.n_values);
        cfg.mc_n = raw.mc_n.unwrap_or(cfg.mc_n);
        cfg.mc_t_end = raw.mc_t_end.unwrap_or(cfg.mc_t_end);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Experiment-specific completeness and precondition checks.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let kind = self.experiment;
        let fail = |msg: String| Err(KavgError::Config(format!("[{kind}] {msg}")));
        self.params
            .validate()
            .map_err(|e| KavgError::Config(format!("[{kind}] {e}")))?;
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.record_every == 0 {
            return fail("record_every must be >= 1".into());
        }
        if kind.uses_grid() {
            let (dx, sigma) = (self.grid.dx(), self.params.sigma);
            if dx > sigma / 5.0 {
                return fail(format!(
                    "grid does not resolve sigma: dx = {dx} > sigma/5 = {}",
                    sigma / 5.0
                ));
            }
            if self.params.d != 1 {
                return fail("the grid engine is one-dimensional (d = 1)".into());
            }
            if self.params.k < 2 {
                return fail("K >= 2 is needed for the equilibrium reference".into());
            }
        }
        match kind {
            PocRate if self.n_values.len() < 3 => fail(format!(
                "at least 3 population sizes are needed for a rate fit (got {})",
                self.n_values.len()
            )),
            PocRate if self.n_values.contains(&0) => fail("population sizes must be >= 1".into()),
            ComDiffusion if self.replicas < 2 || self.steps == 0 => fail("need at least 2 replicas and 1 step".into()),
            ContinuousDecay if !(self.dt > 0.0 && self.t_end >= 0.0 && self.mc_t_end >= 0.0) => {
                fail("dt must be > 0 and horizons >= 0".into())
            }
            ContinuousDecay if self.params.lambda * self.dt > 0.05 => {
                fail(format!("lambda * dt = {} exceeds 0.05", self.params.lambda * self.dt))
            }
            ContinuousDecay if self.mc_n == 0 => fail("mc_n must be >= 1".into()),
            _ => Ok(()),
        }
    }

    /// Parse the section for `kind` from TOML text. A missing section yields
    /// the defaults.
    pub fn from_toml(text: &str, kind: ExperimentKind) -> Result<Self> {
        let mut all = parse_sections(text)?;
        Self::from_raw(kind, all.remove(&kind).unwrap_or_default())
    }

    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| KavgError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, kind)
    }

    /// Canonical TOML rendering with every key spelled out.
    pub fn to_toml(&self) -> String {
        let p = &self.params;
        let list = |xs: Vec<String>| format!("[{}]", xs.join(", "));
        let rate = match p.rate_mode {
            TotalRateMode::PerParticle => "per_particle",
            TotalRateMode::Global => "global",
        };
        let neighbors = match p.neighbors {
            NeighborRule::WithSelf => "with_self",
            NeighborRule::ExcludeSelf => "exclude_self",
        };
        let lines = [
            format!("[{}]", self.experiment),
            format!("d = {}", p.d),
            format!("K = {}", p.k),
            format!("N = {}", p.n),
            format!("sigma = {:?}", p.sigma),
            format!("lambda = {:?}", p.lambda),
            format!("neighbors = \"{neighbors}\""),
            format!("total_rate_mode = \"{rate}\""),
            format!("grid_half_width = {:?}", self.grid.half_width()),
            format!("grid_points = {}", self.grid.points()),
            format!("seeds = {}", render_seeds(&self.seeds)),
            format!("init = {:?}", self.init.to_string()),
            format!("output_dir = {:?}", self.output_dir.display().to_string()),
            format!("steps = {}", self.steps),
            format!("record_every = {}", self.record_every),
            format!("t_end = {:?}", self.t_end),
            format!("dt = {:?}", self.dt),
            format!("replicas = {}", self.replicas),
            format!(
                "n_values = {}",
                list(self.n_values.iter().map(usize::to_string).collect())
            ),
            format!("mc_n = {}", self.mc_n),
            format!("mc_t_end = {:?}", self.mc_t_end),
        ];
        lines.join("\n") + "\n"
    }

    /// SHA-256 of [`Self::to_toml`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// Contiguous runs of more than a few seeds are written as a range.
fn render_seeds(seeds: &[u64]) -> String {
    let contiguous = seeds.windows(2).all(|w| w[0].checked_add(1) == Some(w[1]));
    if seeds.len() > 8 && contiguous {
        format!("{{ first = {}, count = {} }}", seeds[0], seeds.len())
    } else {
        let items: Vec<String> = seeds.iter().map(u64::to_string).collect();
        format!("[{}]", items.join(", "))
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<ExperimentKind, RawSection>> {
    let table: toml::Table = text.parse().map_err(|e| KavgError::Config(format!("{e}")))?;
    let mut out = BTreeMap::new();
    for (name, value) in table {
        let kind: ExperimentKind = name.parse()?;
        let raw = RawSection::deserialize(value).map_err(|e| KavgError::Config(format!("[{name}] {e}")))?;
        out.insert(kind, raw);
    }
    Ok(out)
}

/// Load every section of a config file.
pub fn load_all(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text =
        fs::read_to_string(path).map_err(|e| KavgError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_sections(&text)?
        .into_iter()
        .map(|(kind, raw)| ExperimentConfig::from_raw(kind, raw))
        .collect()
}
