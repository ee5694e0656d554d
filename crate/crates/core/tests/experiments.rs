use std::fs;

use kavg::config::{ExperimentConfig, ExperimentKind};
use kavg::density::GridDensity;
use kavg::experiments::{
    richardson_ratio, run, run_continuous_decay, run_fig5_entropy, run_poc_rate, run_w2_contraction, write_outcome,
};
use kavg::init::InitialCondition;
use kavg::metrics::kl_divergence;
use kavg::model::{equilibrium_density, ModelParams};

fn cfg(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig::defaults(kind)
}

#[test]
fn w2_from_gaussian_start_matches_variance_recursion() {
    let mut c = cfg(ExperimentKind::W2Contraction);
    c.init = InitialCondition::Gaussian { variance: 0.2 };
    c.steps = 8;
    let res = run_w2_contraction(&c).unwrap();
    let v_inf: f64 = 0.0125;
    let mut v: f64 = 0.2;
    for (n, w) in res.w2.iter().enumerate() {
        let expected = (v.sqrt() - v_inf.sqrt()).abs();
        assert!((w - expected).abs() < 1e-4, "step {n}: {w} vs {expected}");
        v = v / 5.0 + 0.01;
    }
}

#[test]
fn w2_from_equilibrium_stays_at_zero() {
    let mut c = cfg(ExperimentKind::W2Contraction);
    c.init = InitialCondition::Gaussian { variance: 0.0125 };
    c.steps = 5;
    let res = run_w2_contraction(&c).unwrap();
    assert!(res.w2_squared().iter().all(|&w| w < 1e-8), "{:?}", res.w2_squared());
    assert!(res.ratios().is_empty());
}

#[test]
fn fig5_first_value_is_the_standalone_divergence() {
    let c = cfg(ExperimentKind::Fig5Entropy);
    let res = run_fig5_entropy(&c).unwrap();
    let lap = GridDensity::laplace(&c.grid, 1.0).unwrap();
    let inf = equilibrium_density(&c.grid, 5, 0.1).unwrap();
    assert_eq!(res.kl[0], kl_divergence(&lap, &inf).unwrap());
    assert_eq!(res.kl.len(), 16);
    assert_eq!(res.bound[3], res.kl[0] / 125.0);
}

#[test]
fn continuous_decay_without_jumps_is_flat() {
    let mut c = cfg(ExperimentKind::ContinuousDecay);
    c.params.lambda = 0.0;
    c.mc_n = 200;
    c.mc_t_end = 1.0;
    let res = run_continuous_decay(&c).unwrap();
    assert_eq!(res.times.len(), 101);
    assert!(res.kl.iter().all(|d| (d - res.kl[0]).abs() < 1e-10));
}

#[test]
fn euler_scheme_is_first_order() {
    let c = cfg(ExperimentKind::Fig4Density);
    let rho0 = c.init.density(&c.grid).unwrap();
    let p = ModelParams::one_d(5, 0.1, 1).unwrap();
    let r = richardson_ratio(&rho0, &p, 1.0, 0.1).unwrap();
    assert!((1.8..2.2).contains(&r), "ratio {r}");
    assert!(richardson_ratio(&rho0, &p, 1.05, 0.1).is_err());
}

#[test]
fn chaos_rate_needs_three_population_sizes() {
    let text = "[poc-rate]\nn_values = [200, 800]\n";
    assert!(ExperimentConfig::from_toml(text, ExperimentKind::PocRate).is_err());
    let mut c = cfg(ExperimentKind::PocRate);
    c.n_values = vec![200, 800];
    c.seeds = vec![1, 2];
    let err = run_poc_rate(&c).unwrap_err().to_string();
    assert!(err.contains("at least 3"), "{err}");
}

#[test]
fn runners_reject_foreign_configs() {
    let c = cfg(ExperimentKind::Fig4Density);
    assert!(run_fig5_entropy(&c).is_err());
    assert!(run_w2_contraction(&c).is_err());
}

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = cfg(kind);
    match kind {
        ExperimentKind::Fig2Histogram => {
            c.params.n = 300;
            c.steps = 20;
            c.seeds = vec![4, 5];
        }
        ExperimentKind::PocRate => {
            c.n_values = vec![50, 100, 200];
            c.seeds = (1..=4).collect();
        }
        ExperimentKind::ComDiffusion => c.replicas = 10,
        ExperimentKind::ContinuousDecay => {
            c.t_end = 0.5;
            c.mc_n = 300;
            c.mc_t_end = 2.0;
        }
        ExperimentKind::Fig5Entropy | ExperimentKind::W2Contraction => c.steps = 3,
        ExperimentKind::Fig4Density => {}
    }
    c
}

#[test]
fn outputs_are_byte_reproducible() {
    for kind in ExperimentKind::ALL {
        let c = small(kind);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = write_outcome(&run(&c).unwrap(), &c, a.path()).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pb = single.install(|| write_outcome(&run(&c).unwrap(), &c, b.path()).unwrap());
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{kind}: {}", x.display());
        }
    }
}

#[test]
fn series_schema_and_manifest() {
    let c = small(ExperimentKind::Fig4Density);
    let dir = tempfile::tempdir().unwrap();
    let paths = write_outcome(&run(&c).unwrap(), &c, dir.path()).unwrap();
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for f in [
        "fig4-density.csv",
        "fig4-density.summary.json",
        "fig4-density.manifest.json",
        "fig4-density.profiles.csv",
    ] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }

    let series = fs::read_to_string(dir.path().join("fig4-density.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# kavg-series v1 experiment=fig4-density config_sha256={}", c.hash())
    );
    assert_eq!(lines.next().unwrap(), "step,metric,value,seed,replica");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "l1");
    assert!(first[2].parse::<f64>().unwrap() > 0.0);

    let profiles = fs::read_to_string(dir.path().join("fig4-density.profiles.csv")).unwrap();
    let header = profiles.lines().nth(1).unwrap();
    assert_eq!(header, "x,rho0,rho1,rho2,rho3,rho4,rho5,rho_inf");
    assert_eq!(profiles.lines().count(), 2 + c.grid.points());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig4-density.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], c.hash());
    assert_eq!(manifest["seeds"], serde_json::json!([1]));
    let back = ExperimentConfig::from_toml(manifest["config"].as_str().unwrap(), ExperimentKind::Fig4Density).unwrap();
    assert_eq!(back, c);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig4-density.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "fig4-density");
    assert_eq!(summary["passed"], true);
    assert!(summary["checks"].as_array().unwrap().len() >= 2);
}

#[test]
fn chaos_rate_series_uses_population_axis() {
    let c = small(ExperimentKind::PocRate);
    let dir = tempfile::tempdir().unwrap();
    write_outcome(&run(&c).unwrap(), &c, dir.path()).unwrap();
    let series = fs::read_to_string(dir.path().join("poc-rate.csv")).unwrap();
    assert_eq!(series.lines().nth(1).unwrap(), "N,metric,value,seed,replica");
    assert!(series.lines().any(|l| l.starts_with("200,mean_w2,")));
}
