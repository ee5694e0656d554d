use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kavg::density::io::{read_density, write_density};
use kavg::density::{apply_t, iterate, GridDensity, GridSpec};

fn kavg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kavg"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn text(o: &Output) -> (String, String) {
    (
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn experiment_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = kavg()
        .args(["fig4-density", "--config"])
        .arg(configs().join("fig4-density.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    let (stdout, stderr) = text(&out);
    assert!(out.status.success(), "{stdout}\n{stderr}");
    assert!(stdout.contains("PASS  l1 distance at step 5"), "{stdout}");
    for f in [
        "fig4-density.csv",
        "fig4-density.summary.json",
        "fig4-density.manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn seeds_flag_replaces_config_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("com.toml");
    fs::write(&cfg, "[com-diffusion]\nreplicas = 5\nsteps = 3\n").unwrap();
    let out = kavg()
        .args(["com-diffusion", "--seeds", "7,9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.code().is_some());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("com-diffusion.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([7, 9]));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig2.toml");
    fs::write(&cfg, "[fig2-histogram]\nN = 400\nsteps = 30\nseeds = [1, 2, 3]\n").unwrap();
    let mut series = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(threads);
        let out = kavg()
            .env("KAVG_THREADS", threads)
            .args(["fig2-histogram", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.code().is_some(), "{:?}", text(&out));
        series.push(fs::read(out_dir.join("fig2-histogram.csv")).unwrap());
    }
    assert_eq!(series[0], series[1]);
}

#[test]
fn bad_thread_count_is_an_error() {
    let out = kavg()
        .env("KAVG_THREADS", "0")
        .args(["fig4-density", "--config"])
        .arg(configs().join("fig4-density.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[fig5-entropy]\ngrid_half_width = 40.0\ngrid_points = 2048\n").unwrap();
    let out = kavg().args(["fig5-entropy", "--config"]).arg(&cfg).output().unwrap();
    let (_, stderr) = text(&out);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr.contains("grid does not resolve sigma"), "{stderr}");
}

#[test]
fn verify_names_precondition_failures() {
    let suite = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    // every experiment gets a config that fails to load
    for (name, body) in [
        ("fig4-density", "grid_half_width = 40.0\ngrid_points = 2048"),
        ("fig5-entropy", "grid_half_width = 40.0\ngrid_points = 2048"),
        ("w2-contraction", "grid_half_width = 40.0\ngrid_points = 2048"),
        ("continuous-decay", "grid_half_width = 40.0\ngrid_points = 2048"),
        ("fig2-histogram", "seeds = []"),
        ("poc-rate", "n_values = [10, 20]"),
        ("com-diffusion", "replicas = 1"),
    ] {
        fs::write(suite.path().join(format!("{name}.toml")), format!("[{name}]\n{body}\n")).unwrap();
    }
    let out = kavg()
        .args(["verify", "--suite"])
        .arg(suite.path())
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    let (stdout, stderr) = text(&out);
    assert_eq!(out.status.code(), Some(1), "{stdout}\n{stderr}");
    assert!(stdout.contains("FAIL  fixed point"), "{stdout}");
    assert!(stdout.contains("precondition"), "{stdout}");
    assert!(stdout.contains("grid does not resolve sigma"), "{stdout}");
    assert!(stdout.contains("PASS  information inequalities"), "{stdout}");
    assert!(
        stderr.contains("failed criteria: fixed point, variance recursion"),
        "{stderr}"
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.path().join("acceptance.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 10);
}

#[test]
fn verify_passes_on_default_configs() {
    let out_dir = tempfile::tempdir().unwrap();
    let before: Vec<_> = fs::read_dir(configs()).unwrap().map(|e| e.unwrap().path()).collect();
    let out = kavg()
        .args(["verify", "--suite"])
        .arg(configs())
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    let (stdout, stderr) = text(&out);
    println!("{stdout}");
    assert!(out.status.success(), "{stdout}\n{stderr}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 10);
    let after: Vec<_> = fs::read_dir(configs()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(before, after);
    assert!(out_dir.path().join("fig5-entropy.csv").exists());
    assert!(out_dir.path().join("fig2-histogram.histogram.csv").exists());
}

fn write(path: &Path, rho: &GridDensity) {
    write_density(fs::File::create(path).unwrap(), rho, &[]).unwrap();
}

fn read(path: &Path) -> GridDensity {
    read_density(fs::File::open(path).unwrap()).unwrap()
}

#[test]
fn density_commands_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::new(4.0, 4096).unwrap();
    let rho = GridDensity::uniform(&grid, 1.0).unwrap();
    let input = dir.path().join("rho.csv");
    write(&input, &rho);

    let once = dir.path().join("once.csv");
    let out = kavg()
        .args(["density", "apply-t", "--K", "3", "--sigma", "0.1", "--in"])
        .arg(&input)
        .arg("--out")
        .arg(&once)
        .output()
        .unwrap();
    assert!(out.status.success(), "{:?}", text(&out));
    let expected = apply_t(&rho, 3, 0.1).unwrap();
    let got = read(&once);
    let diff = got
        .values()
        .iter()
        .zip(expected.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
    assert!(fs::read_to_string(&once)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .contains("K=3 sigma=0.1"));

    let thrice = dir.path().join("thrice.csv");
    let out = kavg()
        .args(["density", "evolve", "--steps", "3", "--in"])
        .arg(&input)
        .arg("--out")
        .arg(&thrice)
        .output()
        .unwrap();
    assert!(out.status.success(), "{:?}", text(&out));
    let expected = iterate(&rho, 5, 0.1, 3).unwrap().pop().unwrap();
    assert!((read(&thrice).variance() - expected.variance()).abs() < 1e-12);

    let cont = dir.path().join("cont.csv");
    let out = kavg()
        .args(["density", "evolve", "--t-end", "0.5", "--dt", "0.05", "--in"])
        .arg(&input)
        .arg("--out")
        .arg(&cont)
        .output()
        .unwrap();
    assert!(out.status.success(), "{:?}", text(&out));
    // variance relaxes towards equilibrium at rate lambda (1 - 1/K) per unit time
    let v = read(&cont).variance();
    assert!(v < rho.variance() && v > 0.0125, "{v}");

    let missing = kavg()
        .args(["density", "apply-t", "--in", "/nonexistent.csv", "--out"])
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
