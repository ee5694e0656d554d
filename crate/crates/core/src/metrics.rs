//! Distances and information functionals between 1-D distributions.
//!
//! Entropy follows the sign convention `H(g) = integral g ln g` (nats), the
//! negative of the usual differential entropy, so that
//! `D_KL(g || h) = H(g) - H(g, h)` with cross-entropy
//! `H(g, h) = integral g ln h`.

use serde::Serialize;

use crate::density::{GaussianProfile, GridDensity, GridSpec};
use crate::error::{KavgError, Result};

/// Values below this are treated as exact zeros in `0 ln 0 := 0`.
const LOG_FLOOR: f64 = 1e-300;

/// Negative KL values above this are quadrature noise and clamp to zero.
const KL_NOISE: f64 = 1e-12;

/// Total variation in the strong-norm convention: `dx sum |mu_j - nu_j|`, in `[0, 2]`.
pub fn tv_distance(mu: &GridDensity, nu: &GridDensity) -> Result<f64> {
    mu.grid().ensure_same(nu.grid())?;
    Ok(mu.dx()
        * mu.values()
            .iter()
            .zip(nu.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Piecewise-linear quantile function of a grid density: the CDF is the
/// cumulative trapezoid sum over nodes, inverted by linear interpolation.
#[derive(Clone, Debug)]
pub struct QuantileFunction {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuantileFunction {
    pub fn new(rho: &GridDensity) -> Self {
        Self::from_values(rho.grid(), rho.values()).expect("grid densities are nonnegative")
    }

    pub fn from_values(grid: &GridSpec, values: &[f64]) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !(*v >= 0.0)) {
            return Err(KavgError::NonMonotoneCdf(grid.node(j)));
        }
        let dx = grid.dx();
        let mut cdf = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(KavgError::InvalidDensity("zero mass".into()));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self {
            xs: grid.nodes().collect(),
            cdf,
        })
    }

    /// `F^{-1}(u)` for `u` in `(0, 1)`.
    pub fn eval(&self, u: f64) -> f64 {
        let j = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        self.interpolate(j, u)
    }

    /// Quantiles at an increasing sequence of levels, in one sweep.
    pub fn eval_sorted(&self, levels: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut j = 1;
        let last = self.cdf.len() - 1;
        levels
            .map(|u| {
                while j < last && self.cdf[j] < u {
                    j += 1;
                }
                self.interpolate(j, u)
            })
            .collect()
    }

    fn interpolate(&self, j: usize, u: f64) -> f64 {
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        if c1 <= c0 {
            return self.xs[j];
        }
        let t = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
        self.xs[j - 1] + t * (self.xs[j] - self.xs[j - 1])
    }
}

/// Mid-point quantile levels `(i + 1/2) / n`, `i = 0..n`.
fn mid_levels(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (i as f64 + 0.5) / n as f64)
}

/// 1-D Wasserstein-2 distance: `L^2` distance between quantile functions,
/// evaluated on a mesh of `4 M` mid-point levels.
pub fn w2_grid(rho: &GridDensity, nu: &GridDensity) -> Result<f64> {
    let qa = QuantileFunction::from_values(rho.grid(), rho.values())?;
    let qb = QuantileFunction::from_values(nu.grid(), nu.values())?;
    let mesh = 4 * rho.grid().points().max(nu.grid().points());
    let a = qa.eval_sorted(mid_levels(mesh));
    let b = qb.eval_sorted(mid_levels(mesh));
    let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sq / mesh as f64).sqrt())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// W2 between two equal-size samples: sorted pairing.
pub fn w2_empirical(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(KavgError::SampleCountMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let (a, b) = (sorted(a), sorted(b));
    let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sq / a.len() as f64).sqrt())
}

/// W2 between an empirical sample and a grid density, matching the `i`-th
/// order statistic with the grid quantile at `(i - 1/2) / N`.
pub fn w2_empirical_vs_grid(samples: &[f64], rho: &GridDensity) -> Result<f64> {
    if samples.is_empty() {
        return Err(KavgError::invalid("empty sample"));
    }
    let q = QuantileFunction::new(rho);
    let s = sorted(samples);
    let levels = q.eval_sorted(mid_levels(s.len()));
    let sq: f64 = s.iter().zip(&levels).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sq / s.len() as f64).sqrt())
}

/// `H(rho) = dx sum rho_j ln rho_j` with `0 ln 0 := 0`: minus the
/// differential entropy, so it decreases as a density spreads out.
pub fn neg_entropy(rho: &GridDensity) -> f64 {
    rho.dx()
        * rho
            .values()
            .iter()
            .filter(|v| **v > LOG_FLOOR)
            .map(|v| v * v.ln())
            .sum::<f64>()
}

/// Cross-entropy `H(g, h) = dx sum g_j ln h_j`.
pub fn neg_cross_entropy(g: &GridDensity, h: &GridDensity) -> Result<f64> {
    Ok(neg_entropy(g) - kl_divergence(g, h)?)
}

/// `D_KL(g || h) = sum_j p_j ln(p_j / q_j)` over nodes with `g_j > 0`, where
/// `p`, `q` are the normalized node masses. Gaussian references carrying a
/// [`GaussianProfile`] use their closed-form log-density, so tails where the
/// sampled values underflow still count.
pub fn kl_divergence(g: &GridDensity, h: &GridDensity) -> Result<f64> {
    g.grid().ensure_same(h.grid())?;
    if let Some(profile) = h.profile() {
        return kl_with_log_reference(g, |x, _| Some(profile.log_node_mass(x)));
    }
    let total: f64 = h.values().iter().sum();
    let log_total = total.ln();
    let hv = h.values();
    kl_with_log_reference(g, |_, j| (hv[j] > LOG_FLOOR).then(|| hv[j].ln() - log_total))
}

/// `D_KL(g || N(mean, variance))` with the Gaussian sampled on `g`'s grid.
pub fn kl_to_gaussian(g: &GridDensity, mean: f64, variance: f64) -> Result<f64> {
    let profile = GaussianProfile::on_grid(g.grid(), mean, variance);
    kl_with_log_reference(g, |x, _| Some(profile.log_node_mass(x)))
}

fn kl_with_log_reference(g: &GridDensity, log_q: impl Fn(f64, usize) -> Option<f64>) -> Result<f64> {
    let total: f64 = g.values().iter().sum();
    let log_total = total.ln();
    let mut acc = 0.0;
    for (j, (x, v)) in g.grid().nodes().zip(g.values()).enumerate() {
        if *v <= LOG_FLOOR {
            continue;
        }
        let lq = log_q(x, j).ok_or(KavgError::AbsoluteContinuity(x))?;
        let p = v / total;
        acc += p * (v.ln() - log_total - lq);
    }
    Ok(if acc < 0.0 && acc > -KL_NOISE { 0.0 } else { acc })
}

/// Bounded test functions used to probe weak convergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    Tanh,
    Cos,
    /// `exp(-x^2)`
    Bump,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] = [TestFunction::Tanh, TestFunction::Cos, TestFunction::Bump];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Tanh => x.tanh(),
            TestFunction::Cos => x.cos(),
            TestFunction::Bump => (-x * x).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Tanh => "tanh",
            TestFunction::Cos => "cos",
            TestFunction::Bump => "bump",
        }
    }

    /// `|<rho_emp - rho, phi>|`.
    pub fn gap(self, samples: &[f64], rho: &GridDensity) -> f64 {
        let emp = samples.iter().map(|&x| self.eval(x)).sum::<f64>() / samples.len() as f64;
        (emp - rho.expect(|x| self.eval(x))).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub w2: f64,
    pub kl: f64,
    pub tv: f64,
    pub neg_entropy: f64,
    pub mean: f64,
    pub variance: f64,
}

impl MetricReport {
    /// Distances of `rho` from `reference`, plus `rho`'s own entropy and moments.
    pub fn compare(rho: &GridDensity, reference: &GridDensity) -> Result<Self> {
        Ok(Self {
            w2: w2_grid(rho, reference)?,
            kl: kl_divergence(rho, reference)?,
            tv: tv_distance(rho, reference)?,
            neg_entropy: neg_entropy(rho),
            mean: rho.mean(),
            variance: rho.variance(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{scale, shift};
    use crate::model::{equilibrium_density, equilibrium_variance};

    fn gauss(v: f64) -> GridDensity {
        GridDensity::gaussian(&GridSpec::default(), 0.0, v).unwrap()
    }

    #[test]
    fn tv_examples() {
        let g = GridSpec::default();
        let a = GridDensity::uniform(&g, 1.0).unwrap();
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        let left = GridDensity::from_fn(&g, |x| if (-3.0..-1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let right = GridDensity::from_fn(&g, |x| if (1.0..3.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        assert!((tv_distance(&left, &right).unwrap() - 2.0).abs() < 1e-10);
        let other = GridDensity::uniform(&GridSpec::new(4.0, 1024).unwrap(), 1.0).unwrap();
        assert!(matches!(tv_distance(&a, &other), Err(KavgError::GridMismatch(_))));
    }

    #[test]
    fn w2_gaussians_and_translation() {
        let a = gauss(0.04);
        assert_eq!(w2_grid(&a, &a).unwrap(), 0.0);
        let b = gauss(0.09);
        assert!((w2_grid(&a, &b).unwrap() - 0.1).abs() < 1e-4);
        let h = 0.137;
        let moved = shift(&a, h).unwrap();
        assert!((w2_grid(&a, &moved).unwrap() - h).abs() < 2.0 * a.dx());
    }

    #[test]
    fn quantile_rejects_negative_values() {
        let g = GridSpec::new(1.0, 256).unwrap();
        let mut v = vec![0.5; 256];
        v[10] = -0.1;
        assert!(matches!(
            QuantileFunction::from_values(&g, &v),
            Err(KavgError::NonMonotoneCdf(_))
        ));
    }

    #[test]
    fn quantile_sweep_matches_pointwise() {
        let rho = GridDensity::laplace(&GridSpec::wide(), 1.0).unwrap();
        let q = QuantileFunction::new(&rho);
        let levels: Vec<f64> = mid_levels(1000).collect();
        let swept = q.eval_sorted(levels.iter().cloned());
        for (u, s) in levels.iter().zip(&swept) {
            assert_eq!(q.eval(*u), *s);
        }
        // Laplace median 0, quartile ln 2
        assert!(q.eval(0.5).abs() < 1e-9);
        assert!((q.eval(0.75) - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn w2_empirical_examples() {
        let a = vec![0.3, -1.0, 2.5, 0.0];
        assert_eq!(w2_empirical(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.25).collect();
        assert!((w2_empirical(&b, &a).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            w2_empirical(&a, &b[..3]),
            Err(KavgError::SampleCountMismatch(4, 3))
        ));
    }

    #[test]
    fn w2_empirical_vs_grid_at_exact_quantiles() {
        let rho = gauss(0.25);
        let q = QuantileFunction::new(&rho);
        let n = 1000;
        let samples: Vec<f64> = (1..=n).map(|i| q.eval((i as f64 - 0.5) / n as f64)).collect();
        assert!(w2_empirical_vs_grid(&samples, &rho).unwrap() < rho.dx());
    }

    #[test]
    fn entropy_closed_forms() {
        let g = GridSpec::default();
        let u = GridDensity::uniform(&g, 1.0).unwrap();
        assert!((neg_entropy(&u) - 0.5f64.ln()).abs() < 1e-3);
        for v in [0.01, 0.05, 0.3] {
            let rho = gauss(v);
            let exact = -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * v).ln();
            assert!((neg_entropy(&rho) - exact).abs() < 1e-6, "v = {v}");
        }
        let rho = gauss(0.2);
        let scaled = scale(&rho, 2.0).unwrap();
        assert!((neg_entropy(&scaled) - neg_entropy(&rho) - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn kl_gaussian_closed_form() {
        let g = GridSpec::default();
        let inf = equilibrium_density(&g, 5, 0.1).unwrap();
        let vinf = equilibrium_variance(5, 0.1).unwrap();
        assert!(kl_divergence(&inf, &inf).unwrap().abs() < 1e-12);
        for s2 in [0.005, 0.0125 * 1.1, 0.04] {
            let rho = gauss(s2);
            let r = s2 / vinf;
            let exact = 0.5 * (r - 1.0 - r.ln());
            assert!((kl_divergence(&rho, &inf).unwrap() - exact).abs() < 1e-6);
            assert!((kl_to_gaussian(&rho, 0.0, vinf).unwrap() - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn kl_requires_absolute_continuity() {
        let g = GridSpec::default();
        let wide = GridDensity::uniform(&g, 2.0).unwrap();
        let narrow = GridDensity::uniform(&g, 1.0).unwrap();
        assert!(matches!(
            kl_divergence(&wide, &narrow),
            Err(KavgError::AbsoluteContinuity(_))
        ));
        assert!(kl_divergence(&narrow, &wide).unwrap() > 0.0);
    }

    #[test]
    fn test_functions() {
        let rho = gauss(0.1);
        // symmetric density, odd function
        assert!(rho.expect(|x| TestFunction::Tanh.eval(x)).abs() < 1e-12);
        // E cos X = exp(-v/2)
        assert!((rho.expect(|x| TestFunction::Cos.eval(x)) - (-0.05f64).exp()).abs() < 1e-12);
        assert_eq!(
            TestFunction::Bump.gap(&[0.0], &GridDensity::point(&GridSpec::default(), 0.0).unwrap()),
            0.0
        );
    }

    #[test]
    fn report_fields() {
        let inf = equilibrium_density(&GridSpec::default(), 5, 0.1).unwrap();
        let r = MetricReport::compare(&gauss(0.02), &inf).unwrap();
        assert!(r.kl > 0.0 && r.tv > 0.0 && r.tv <= 2.0 && r.w2 > 0.0);
        assert!((r.variance - 0.02).abs() < 1e-10);
    }
}
