use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kavg::acceptance::{format_line, run_suite, Suite};
use kavg::config::{ExperimentConfig, ExperimentKind};
use kavg::density::io::{read_density, write_density};
use kavg::density::{apply_t, evolve_continuous, iterate};
use kavg::experiments::{run, write_outcome};

/// Simulate the K-averaging particle model and check its mean-field theory.
#[derive(Parser)]
#[command(name = "kavg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Particle ensemble against the Gaussian equilibrium.
    #[command(name = "fig2-histogram")]
    Fig2Histogram(RunArgs),
    /// Density iterates from a uniform start.
    #[command(name = "fig4-density")]
    Fig4Density(RunArgs),
    /// Relative-entropy decay of the density iteration.
    #[command(name = "fig5-entropy")]
    Fig5Entropy(RunArgs),
    /// Empirical-measure error against population size.
    #[command(name = "poc-rate")]
    PocRate(RunArgs),
    /// Squared W2 distance to equilibrium per step.
    #[command(name = "w2-contraction")]
    W2Contraction(RunArgs),
    /// Center-of-mass increments over many replicas.
    #[command(name = "com-diffusion")]
    ComDiffusion(RunArgs),
    /// Continuous-time entropy decay and particle check.
    #[command(name = "continuous-decay")]
    ContinuousDecay(RunArgs),
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    Verify {
        /// Directory with one `<experiment>.toml` per experiment.
        #[arg(long)]
        suite: PathBuf,
        /// Write experiment outputs and `acceptance.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ad-hoc density operations on density CSV files.
    Density {
        #[command(subcommand)]
        op: DensityOp,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds replacing the configured list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(short = 'K', long = "K", default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
}

#[derive(Subcommand)]
enum DensityOp {
    /// One application of the mean-field map.
    ApplyT(DensityArgs),
    /// Several iterates, or continuous time when `--t-end` is given.
    Evolve {
        #[command(flatten)]
        common: DensityArgs,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("KAVG_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("KAVG_THREADS={v}"))?;
        if n == 0 {
            bail!("KAVG_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<bool> {
    let (kind, args) = match command {
        Command::Fig2Histogram(a) => (ExperimentKind::Fig2Histogram, a),
        Command::Fig4Density(a) => (ExperimentKind::Fig4Density, a),
        Command::Fig5Entropy(a) => (ExperimentKind::Fig5Entropy, a),
        Command::PocRate(a) => (ExperimentKind::PocRate, a),
        Command::W2Contraction(a) => (ExperimentKind::W2Contraction, a),
        Command::ComDiffusion(a) => (ExperimentKind::ComDiffusion, a),
        Command::ContinuousDecay(a) => (ExperimentKind::ContinuousDecay, a),
        Command::Verify { suite, out } => return verify(&suite, out.as_deref()),
        Command::Density { op } => return density(op).map(|_| true),
    };
    run_experiment(kind, args)
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config, kind)?;
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
        cfg.validate()?;
    }
    let outcome = run(&cfg)?;
    let dir = args.out.unwrap_or_else(|| cfg.output_dir.clone());
    for path in write_outcome(&outcome, &cfg, &dir)? {
        println!("wrote {}", path.display());
    }
    for c in &outcome.checks {
        println!(
            "{}  {}  {:e}  ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.detail
        );
    }
    Ok(outcome.passed())
}

fn verify(suite_dir: &Path, out: Option<&Path>) -> Result<bool> {
    let suite = Suite::load_dir(suite_dir)?;
    let results = run_suite(&suite, out)?;
    for c in &results {
        println!("{}", format_line(c));
    }
    let failed: Vec<&str> = results.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        Ok(true)
    } else {
        eprintln!("failed criteria: {}", failed.join(", "));
        Ok(false)
    }
}

fn density(op: DensityOp) -> Result<()> {
    let (common, result, params) = match op {
        DensityOp::ApplyT(a) => {
            let rho = read(&a.input)?;
            let r = apply_t(&rho, a.k, a.sigma)?;
            (a, r, vec![])
        }
        DensityOp::Evolve {
            common,
            steps,
            t_end,
            dt,
            lambda,
        } => {
            let rho = read(&common.input)?;
            match t_end {
                Some(t) => {
                    let (_, r) = evolve_continuous(&rho, common.k, common.sigma, lambda, t, dt)?
                        .pop()
                        .expect("initial density kept");
                    let p = vec![
                        ("lambda", lambda.to_string()),
                        ("t", t.to_string()),
                        ("dt", dt.to_string()),
                    ];
                    (common, r, p)
                }
                None => {
                    let r = iterate(&rho, common.k, common.sigma, steps)?
                        .pop()
                        .expect("initial density kept");
                    (common, r, vec![("steps", steps.to_string())])
                }
            }
        }
    };
    let mut all = vec![("K", common.k.to_string()), ("sigma", common.sigma.to_string())];
    all.extend(params);
    let out = File::create(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    write_density(BufWriter::new(out), &result, &all)?;
    Ok(())
}

fn read(path: &Path) -> Result<kavg::density::GridDensity> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_density(f).with_context(|| format!("reading {}", path.display()))
}
