//! Initial conditions shared by the particle simulators and the grid engine.
//!
//! Written in configs as `uniform(a)`, `laplace(b)` (or bare `laplace` for
//! `b = 1`), `gaussian(v)`, `point(x)` (bare `point` is `x = 0`) and
//! `file(path)`.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{io::read_density, shift, GridDensity, GridSpec};
use crate::error::{KavgError, Result};
use crate::particles::{read_last_snapshot, Ensemble};
use crate::rng::RandomSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialCondition {
    /// `U(-a, a)` in every coordinate.
    Uniform { a: f64 },
    /// Density `exp(-|x|/b) / (2b)` in every coordinate.
    Laplace { b: f64 },
    /// Centered Gaussian with the given variance per coordinate.
    Gaussian { variance: f64 },
    /// All mass at `at` (every coordinate).
    Point { at: f64 },
    /// A density CSV for the grid engine or a snapshot CSV for particles.
    File(PathBuf),
}

impl InitialCondition {
    /// `N` particles in `R^d`, coordinates drawn independently.
    pub fn sample_ensemble(&self, n: usize, d: usize, rng: &mut RandomSource) -> Result<Ensemble> {
        let draw = |rng: &mut RandomSource| -> f64 {
            match *self {
                Self::Uniform { a } => rng.uniform(-a, a),
                Self::Laplace { b } => {
                    // inverse CDF with a uniform sign
                    let e = rng.exponential(1.0 / b);
                    if rng.uniform(0.0, 1.0) < 0.5 {
                        -e
                    } else {
                        e
                    }
                }
                Self::Gaussian { variance } => variance.sqrt() * rng.standard_normal(),
                Self::Point { at } => at,
                Self::File(_) => unreachable!(),
            }
        };
        if let Self::File(path) = self {
            let ens = read_last_snapshot(BufReader::new(File::open(path)?))?;
            if ens.n() != n || ens.d() != d {
                return Err(KavgError::invalid(format!(
                    "{} holds {} particles in d = {}, expected N = {n}, d = {d}",
                    path.display(),
                    ens.n(),
                    ens.d()
                )));
            }
            return Ok(ens);
        }
        let positions = (0..n * d).map(|_| draw(rng)).collect();
        Ensemble::new(positions, n, d)
    }

    /// The initial density on `grid`. File densities are recentered to mean
    /// zero; the analytic ones are centered by construction (except an
    /// off-origin point mass, which is kept where it was asked for).
    pub fn density(&self, grid: &GridSpec) -> Result<GridDensity> {
        match self {
            Self::Uniform { a } => GridDensity::uniform(grid, *a),
            Self::Laplace { b } => GridDensity::laplace(grid, *b),
            Self::Gaussian { variance } => GridDensity::gaussian(grid, 0.0, *variance),
            Self::Point { at } => GridDensity::point(grid, *at),
            Self::File(path) => {
                let rho = read_density(BufReader::new(File::open(path)?))?;
                if rho.grid() != grid {
                    return Err(KavgError::GridMismatch(format!(
                        "{} is on a different grid than configured",
                        path.display()
                    )));
                }
                let m = rho.mean();
                if m == 0.0 {
                    Ok(rho)
                } else {
                    shift(&rho, -m)
                }
            }
        }
    }

    /// Variance of one coordinate.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            Self::Uniform { a } => Some(a * a / 3.0),
            Self::Laplace { b } => Some(2.0 * b * b),
            Self::Gaussian { variance } => Some(variance),
            Self::Point { .. } => Some(0.0),
            Self::File(_) => None,
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { a } => write!(f, "uniform({a})"),
            Self::Laplace { b } => write!(f, "laplace({b})"),
            Self::Gaussian { variance } => write!(f, "gaussian({variance})"),
            Self::Point { at } => write!(f, "point({at})"),
            Self::File(p) => write!(f, "file({})", p.display()),
        }
    }
}

impl FromStr for InitialCondition {
    type Err = KavgError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) if s.ends_with(')') => (s[..open].trim(), Some(s[open + 1..s.len() - 1].trim())),
            Some(_) => return Err(KavgError::Parse(format!("unbalanced parentheses in {s:?}"))),
            None => (s, None),
        };
        let num = |default: Option<f64>| -> Result<f64> {
            match (arg, default) {
                (Some(a), _) if !a.is_empty() => a
                    .parse()
                    .map_err(|_| KavgError::Parse(format!("bad number {a:?} in {s:?}"))),
                (_, Some(v)) => Ok(v),
                _ => Err(KavgError::Parse(format!("{name} needs an argument"))),
            }
        };
        let positive = |v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(KavgError::Parse(format!("{s:?}: parameter must be > 0")))
            }
        };
        match name {
            "uniform" => Ok(Self::Uniform {
                a: positive(num(None)?)?,
            }),
            "laplace" => Ok(Self::Laplace {
                b: positive(num(Some(1.0))?)?,
            }),
            "gaussian" => Ok(Self::Gaussian {
                variance: positive(num(None)?)?,
            }),
            "point" => Ok(Self::Point { at: num(Some(0.0))? }),
            "file" => match arg {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(KavgError::Parse("file needs a path".into())),
            },
            _ => Err(KavgError::Parse(format!("unknown initial condition {s:?}"))),
        }
    }
}

impl TryFrom<String> for InitialCondition {
    type Error = KavgError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitialCondition> for String {
    fn from(init: InitialCondition) -> String {
        init.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::io::write_density;
    use crate::particles::write_step_snapshots;
    use crate::stats::{mean, variance_with_se};

    #[test]
    fn parse_and_display() {
        let cases = [
            ("uniform(1)", InitialCondition::Uniform { a: 1.0 }),
            ("laplace", InitialCondition::Laplace { b: 1.0 }),
            ("laplace(0.5)", InitialCondition::Laplace { b: 0.5 }),
            (" gaussian( 0.2 ) ", InitialCondition::Gaussian { variance: 0.2 }),
            ("point", InitialCondition::Point { at: 0.0 }),
            ("point(-1.5)", InitialCondition::Point { at: -1.5 }),
            ("file(a/b.csv)", InitialCondition::File("a/b.csv".into())),
        ];
        for (text, want) in cases {
            let got: InitialCondition = text.parse().unwrap();
            assert_eq!(got, want);
            assert_eq!(got.to_string().parse::<InitialCondition>().unwrap(), want);
        }
        for bad in [
            "uniform",
            "uniform(-1)",
            "gaussian(x)",
            "cauchy(1)",
            "uniform(1",
            "file()",
        ] {
            assert!(bad.parse::<InitialCondition>().is_err(), "{bad}");
        }
    }

    #[test]
    fn samples_have_the_right_moments() {
        let n = 200_000;
        for init in [
            InitialCondition::Uniform { a: 1.0 },
            InitialCondition::Laplace { b: 1.0 },
            InitialCondition::Gaussian { variance: 0.3 },
        ] {
            let mut rng = RandomSource::new(1, 0);
            let e = init.sample_ensemble(n, 1, &mut rng).unwrap();
            let xs = e.positions();
            let (v, se) = variance_with_se(xs);
            let target = init.variance().unwrap();
            assert!((v - target).abs() < 4.0 * se, "{init}: {v} vs {target}");
            assert!(mean(xs).abs() < 4.0 * (target / n as f64).sqrt());
        }
        let e = InitialCondition::Point { at: 2.0 }
            .sample_ensemble(5, 3, &mut RandomSource::new(0, 0))
            .unwrap();
        assert!(e.positions().iter().all(|&x| x == 2.0));
    }

    #[test]
    fn densities_match_variances() {
        let g = GridSpec::wide();
        for init in [
            InitialCondition::Uniform { a: 1.0 },
            InitialCondition::Laplace { b: 1.0 },
            InitialCondition::Gaussian { variance: 0.3 },
        ] {
            let rho = init.density(&g).unwrap();
            assert!((rho.variance() - init.variance().unwrap()).abs() < 1e-6, "{init}");
        }
    }

    #[test]
    fn file_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(4.0, 1024).unwrap();
        let rho = shift(&GridDensity::gaussian(&g, 0.0, 0.1).unwrap(), 0.5).unwrap();
        let path = dir.path().join("rho.csv");
        write_density(File::create(&path).unwrap(), &rho, &[]).unwrap();
        let init = InitialCondition::File(path);
        let loaded = init.density(&g).unwrap();
        assert!(loaded.mean().abs() < 1e-9);
        assert!((loaded.variance() - rho.variance()).abs() < 1e-6);
        assert!(matches!(
            init.density(&GridSpec::default()),
            Err(KavgError::GridMismatch(_))
        ));

        let ens = Ensemble::new(vec![0.1, 0.2, 0.3, 0.4], 2, 2).unwrap();
        let path = dir.path().join("snap.csv");
        write_step_snapshots(File::create(&path).unwrap(), std::slice::from_ref(&ens)).unwrap();
        let init = InitialCondition::File(path);
        let mut rng = RandomSource::new(0, 0);
        assert_eq!(init.sample_ensemble(2, 2, &mut rng).unwrap(), ens);
        assert!(init.sample_ensemble(3, 2, &mut rng).is_err());
    }
}
