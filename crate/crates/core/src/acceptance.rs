//! Acceptance suite.
//!
//! Runs every acceptance criterion against a set of experiment configs and
//! reports one [`Criterion`] per check. A suite directory holds one
//! `<experiment>.toml` per experiment; missing files fall back to the
//! built-in defaults. A file that fails to load fails every criterion that
//! needs it, with the load error as the reason.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::density::{apply_t, convolve, iterate, scale, self_convolve, GridDensity, GridSpec};
use crate::error::{KavgError, Result};
use crate::experiments::{
    run_com_diffusion, run_continuous_decay, run_fig2_histogram, run_fig4_density, run_fig5_entropy, run_poc_rate,
    run_w2_contraction, write_outcome, Check, Outcome,
};
use crate::init::InitialCondition;
use crate::metrics::{kl_divergence, neg_entropy, tv_distance};
use crate::model::{equilibrium_density, equilibrium_variance};
use crate::rng::RandomSource;

/// Result of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub values: BTreeMap<String, f64>,
}

impl Criterion {
    fn failed(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: false,
            detail: detail.into(),
            elapsed: Duration::ZERO,
            values: BTreeMap::new(),
        }
    }
}

/// Experiment configs keyed by kind, with load failures kept.
#[derive(Debug)]
pub struct Suite {
    configs: BTreeMap<&'static str, std::result::Result<ExperimentConfig, String>>,
}

impl Suite {
    pub fn defaults() -> Self {
        let configs = ExperimentKind::ALL
            .iter()
            .map(|&k| (k.name(), Ok(ExperimentConfig::defaults(k))))
            .collect();
        Self { configs }
    }

    /// Reads `<dir>/<experiment>.toml` for every experiment.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(KavgError::Config(format!(
                "suite directory {} not found",
                dir.display()
            )));
        }
        let configs = ExperimentKind::ALL
            .iter()
            .map(|&k| {
                let path = dir.join(format!("{}.toml", k.name()));
                let cfg = if path.exists() {
                    ExperimentConfig::load(&path, k).map_err(|e| format!("{}: {e}", path.display()))
                } else {
                    Ok(ExperimentConfig::defaults(k))
                };
                (k.name(), cfg)
            })
            .collect();
        Ok(Self { configs })
    }

    pub fn config(&self, kind: ExperimentKind) -> std::result::Result<&ExperimentConfig, String> {
        match self.configs.get(kind.name()) {
            Some(Ok(c)) => Ok(c),
            Some(Err(e)) => Err(e.clone()),
            None => Err(format!("no config for {kind}")),
        }
    }

    pub fn set(&mut self, cfg: ExperimentConfig) {
        self.configs.insert(cfg.experiment.name(), Ok(cfg));
    }
}

/// Names of all criteria, in run order.
pub const CRITERIA: [&str; 10] = [
    "fixed point",
    "variance recursion",
    "relative entropy contraction",
    "wasserstein contraction",
    "particle equilibrium",
    "density relaxation",
    "propagation of chaos rate",
    "center of mass diffusion",
    "continuous-time decay",
    "information inequalities",
];

type Written = Vec<(ExperimentConfig, Outcome)>;

struct Ctx<'a> {
    suite: &'a Suite,
    written: Written,
}

impl Ctx<'_> {
    fn cfg(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        self.suite
            .config(kind)
            .cloned()
            .map_err(|e| KavgError::Config(format!("precondition: {e}")))
    }
}

/// Runs all criteria. With `out`, experiment outputs are written there and
/// the criteria are stored as `acceptance.json`.
pub fn run_suite(suite: &Suite, out: Option<&Path>) -> Result<Vec<Criterion>> {
    let mut ctx = Ctx {
        suite,
        written: Vec::new(),
    };
    let runners: [fn(&mut Ctx) -> Result<Criterion>; 10] = [
        fixed_point,
        variance_recursion,
        entropy_contraction,
        w2_contraction,
        particle_equilibrium,
        density_relaxation,
        chaos_rate,
        com_diffusion,
        continuous_decay,
        information_inequalities,
    ];
    let mut results = Vec::new();
    for (name, f) in CRITERIA.iter().zip(runners) {
        let t0 = Instant::now();
        let mut c = f(&mut ctx).unwrap_or_else(|e| Criterion::failed(name, e.to_string()));
        c.elapsed = t0.elapsed();
        results.push(c);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for (cfg, outcome) in &ctx.written {
            write_outcome(outcome, cfg, dir)?;
        }
        write_report(&results, &dir.join("acceptance.json"))?;
    }
    Ok(results)
}

pub fn write_report(results: &[Criterion], path: &Path) -> Result<PathBuf> {
    let rows: Vec<serde_json::Value> = results
        .iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "passed": c.passed,
                "detail": c.detail,
                "values": c.values,
            })
        })
        .collect();
    let doc = serde_json::json!({ "passed": results.iter().all(|c| c.passed), "criteria": rows });
    std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(path.to_path_buf())
}

/// One line per criterion, `PASS`/`FAIL` first.
pub fn format_line(c: &Criterion) -> String {
    format!(
        "{}  {:<30} {:>8.2}s  {}",
        if c.passed { "PASS" } else { "FAIL" },
        c.name,
        c.elapsed.as_secs_f64(),
        c.detail
    )
}

fn from_checks(name: &'static str, checks: &[Check], extra: &[(&str, f64)]) -> Criterion {
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let detail = if failed.is_empty() {
        checks
            .iter()
            .map(|c| format!("{} ({:.4e})", c.name, c.value))
            .collect::<Vec<_>>()
            .join("; ")
    } else {
        failed
            .iter()
            .map(|c| format!("{}: {:.4e} vs {:.4e}, {}", c.name, c.value, c.threshold, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    };
    let mut values: BTreeMap<String, f64> = checks.iter().map(|c| (c.name.clone(), c.value)).collect();
    values.extend(extra.iter().map(|(k, v)| (k.to_string(), *v)));
    Criterion {
        name,
        passed: failed.is_empty(),
        detail,
        elapsed: Duration::ZERO,
        values,
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t0 = Instant::now();
    let v = f()?;
    Ok((v, t0.elapsed().as_secs_f64()))
}

fn runtime_check(name: &str, secs: f64, limit: f64) -> Check {
    Check::at_most(name, secs, limit, "wall-clock seconds")
}

fn fixed_point(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::Fig4Density)?;
    let (k, sigma) = (cfg.params.k, cfg.params.sigma);
    let inf = equilibrium_density(&cfg.grid, k, sigma)?;
    let (next, secs) = timed(|| apply_t(&inf, k, sigma))?;
    let l1 = tv_distance(&next, &inf)?;
    let checks = [
        Check::at_most("||T[rho_inf] - rho_inf||_1", l1, 1e-6, ""),
        runtime_check("one application of T", secs, 1.0),
    ];
    Ok(from_checks(CRITERIA[0], &checks, &[]))
}

fn variance_recursion(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::Fig4Density)?;
    let (k, sigma) = (cfg.params.k, cfg.params.sigma);
    let rho0 = cfg.init.density(&cfg.grid)?;
    let seq = iterate(&rho0, k, sigma, 15)?;
    let worst = seq
        .windows(2)
        .map(|w| (w[1].variance() - (w[0].variance() / k as f64 + sigma * sigma)).abs())
        .fold(0.0, f64::max);
    let limit = equilibrium_variance(k, sigma)?;
    let last = seq.last().expect("15 iterates").variance();
    let checks = [
        Check::at_most("variance follows v/K + sigma^2 over 15 steps", worst, 1e-8, ""),
        Check::at_most(
            "variance after 15 steps vs K sigma^2/(K-1)",
            (last - limit).abs(),
            1e-6,
            "",
        ),
    ];
    Ok(from_checks(CRITERIA[1], &checks, &[("variance_15", last)]))
}

fn entropy_contraction(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::Fig5Entropy)?;
    let (res, secs) = timed(|| run_fig5_entropy(&cfg))?;
    let mut checks = res.checks();
    checks.push(runtime_check("runtime", secs, 10.0));
    let c = from_checks(CRITERIA[2], &checks, &[("kl_0", res.kl[0])]);
    ctx.written.push((cfg, res.outcome()));
    Ok(c)
}

fn w2_contraction(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::W2Contraction)?;
    let res = run_w2_contraction(&cfg)?;
    let mut checks = res.checks();
    for init in [
        InitialCondition::Laplace { b: 1.0 },
        InitialCondition::Uniform { a: 1.0 },
    ] {
        for k in [2, 5] {
            let mut v = cfg.clone();
            v.init = init.clone();
            v.params.k = k;
            let r = run_w2_contraction(&v)?;
            for mut c in r.checks() {
                c.name = format!("{init}, K = {k}: {}", c.name);
                checks.push(c);
            }
        }
    }
    let c = from_checks(CRITERIA[3], &checks, &[]);
    ctx.written.push((cfg, res.outcome()));
    Ok(c)
}

fn particle_equilibrium(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::Fig2Histogram)?;
    let (res, secs) = timed(|| run_fig2_histogram(&cfg))?;
    let mut checks = res.checks();
    checks.push(runtime_check("runtime", secs, 30.0));
    let c = from_checks(CRITERIA[4], &checks, &[]);
    ctx.written.push((cfg.clone(), res.outcome(&cfg)));
    Ok(c)
}

fn density_relaxation(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::Fig4Density)?;
    let res = run_fig4_density(&cfg)?;
    let extra: Vec<(&str, f64)> = [("l1_3", 3), ("l1_5", 5)]
        .into_iter()
        .filter_map(|(k, n)| res.l1.get(n).map(|&v| (k, v)))
        .collect();
    let c = from_checks(CRITERIA[5], &res.checks(), &extra);
    ctx.written.push((cfg, res.outcome()));
    Ok(c)
}

fn chaos_rate(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::PocRate)?;
    let (res, secs) = timed(|| run_poc_rate(&cfg))?;
    let mut checks = res.checks();
    checks.push(runtime_check("runtime", secs, 120.0));
    let c = from_checks(CRITERIA[6], &checks, &[("tanh_dominance", res.tanh_dominance())]);
    ctx.written.push((cfg, res.outcome()));
    Ok(c)
}

fn com_diffusion(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::ComDiffusion)?;
    let res = run_com_diffusion(&cfg)?;
    let c = from_checks(CRITERIA[7], &res.checks(), &[]);
    ctx.written.push((cfg, res.outcome()));
    Ok(c)
}

fn continuous_decay(ctx: &mut Ctx) -> Result<Criterion> {
    let cfg = ctx.cfg(ExperimentKind::ContinuousDecay)?;
    let res = run_continuous_decay(&cfg)?;
    let c = from_checks(
        CRITERIA[8],
        &res.checks(),
        &[("worst_bound_ratio", res.worst_bound_ratio())],
    );
    ctx.written.push((cfg, res.outcome()));
    Ok(c)
}

/// Random mixture of Gaussian, box and Laplace bumps with mean in `[-1, 1]`.
/// With `broad`, one wide Gaussian keeps the density positive on the grid.
pub fn random_density(grid: &GridSpec, rng: &mut RandomSource, broad: bool) -> Result<GridDensity> {
    let parts = 1 + rng.index(3);
    let mut bumps: Vec<(f64, Box<dyn Fn(f64) -> f64>)> = Vec::new();
    for _ in 0..parts {
        let c = rng.uniform(-1.0, 1.0);
        let w = rng.uniform(0.2, 1.0);
        let f: Box<dyn Fn(f64) -> f64> = match rng.index(3) {
            0 => {
                let v = rng.uniform(0.005, 0.1);
                Box::new(move |x| (-(x - c).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt())
            }
            1 => {
                let a = rng.uniform(0.1, 0.8);
                Box::new(move |x| if (x - c).abs() <= a { 0.5 / a } else { 0.0 })
            }
            _ => {
                let b = rng.uniform(0.03, 0.12);
                Box::new(move |x| (-(x - c).abs() / b).exp() / (2.0 * b))
            }
        };
        bumps.push((w, f));
    }
    if broad {
        let v = rng.uniform(0.05, 0.2);
        let c = rng.uniform(-0.5, 0.5);
        bumps.push((
            rng.uniform(0.1, 0.5),
            Box::new(move |x| (-(x - c).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()),
        ));
    }
    GridDensity::from_fn(grid, |x| bumps.iter().map(|(w, f)| w * f(x)).sum())
}

fn information_inequalities(_ctx: &mut Ctx) -> Result<Criterion> {
    let mut checks = Vec::new();
    let grid = GridSpec::default();

    // entropy power: H(sqrt(l) X + sqrt(1-l) Y) <= l H(X) + (1-l) H(Y)
    let bimodal = GridDensity::from_fn(&grid, |x| {
        let g = |m: f64| (-(x - m).powi(2) / 0.04).exp();
        g(-0.7) + g(0.7)
    })?;
    let pairs = [
        (
            "uniform/laplace",
            GridDensity::uniform(&grid, 1.0)?,
            GridDensity::laplace(&grid, 0.12)?,
        ),
        (
            "uniform/gaussian",
            GridDensity::uniform(&grid, 1.0)?,
            GridDensity::gaussian(&grid, 0.0, 0.2)?,
        ),
        ("bimodal/laplace", bimodal, GridDensity::laplace(&grid, 0.12)?),
    ];
    let mut worst = f64::NEG_INFINITY;
    for (_, g, h) in &pairs {
        for l in [0.25, 0.5, 0.75] {
            let mix = convolve(&scale(g, 1.0 / f64::sqrt(l))?, &scale(h, 1.0 / f64::sqrt(1.0 - l))?)?;
            let excess = neg_entropy(&mix) - (l * neg_entropy(g) + (1.0 - l) * neg_entropy(h));
            worst = worst.max(excess);
        }
    }
    checks.push(Check::at_most(
        "entropy of scaled sums <= mixed entropies + 1e-6",
        worst,
        1e-6,
        "3 pairs x 3 weights",
    ));

    // normalized sums of Laplace variables lose entropy monotonically
    let lap = GridDensity::laplace(&GridSpec::wide(), 1.0)?;
    let mut h = Vec::new();
    for n in 1..=6 {
        h.push(neg_entropy(&scale(&self_convolve(&lap, n)?, f64::sqrt(n as f64))?));
    }
    let rise = h.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most(
        "entropy of normalized sums is nonincreasing (n = 1..6)",
        rise,
        1e-6,
        "largest rise",
    ));

    // nonnegativity of relative entropy and TV Lipschitz bound of T
    let mut rng = RandomSource::new(20_240_501, 0);
    let mut kl_min = f64::INFINITY;
    let mut tv_worst = f64::NEG_INFINITY;
    let (k, sigma) = (5, 0.1);
    for _ in 0..100 {
        let g = random_density(&grid, &mut rng, false)?;
        let h = random_density(&grid, &mut rng, true)?;
        kl_min = kl_min.min(kl_divergence(&g, &h)?);
        let before = tv_distance(&g, &h)?;
        let after = tv_distance(&apply_t(&g, k, sigma)?, &apply_t(&h, k, sigma)?)?;
        tv_worst = tv_worst.max(after - k as f64 * before);
    }
    checks.push(Check::at_least(
        "relative entropy >= 0 on 100 random pairs",
        kl_min,
        0.0,
        "smallest value",
    ));
    checks.push(Check::at_most(
        "||T g - T h||_1 <= K ||g - h||_1 on 100 random pairs",
        tv_worst,
        1e-12,
        "largest excess",
    ));
    Ok(from_checks(CRITERIA[9], &checks, &[]))
}
