use super::grid::{GridDensity, GridSpec};
use super::spectral::{clean_densities, forward, frequency, inverse, padded_masses, powi};
use super::MAX_LAMBDA_DT;
use crate::error::{KavgError, Result};

/// `K`-fold self-convolution `C_K[rho]` on the grid of half-width `K L`
/// with the same spacing.
pub fn self_convolve(rho: &GridDensity, k: usize) -> Result<GridDensity> {
    if k == 0 {
        return Err(KavgError::invalid("K must be >= 1"));
    }
    if k == 1 {
        return Ok(rho.clone());
    }
    let dx = rho.dx();
    let ext = rho.grid().extended(k);
    // K(M - 1) + 1 <= K M nodes: the circular product never wraps.
    let mut buf = padded_masses(rho.values(), dx, ext.points());
    forward(&mut buf);
    buf.iter_mut().for_each(|z| *z = powi(*z, k));
    inverse(&mut buf);
    let values = clean_densities(buf.iter().map(|z| z.re), dx)?;
    GridDensity::from_raw(ext, values).ensure_resolved()
}

/// Density of `X + Y` for independent `X ~ a`, `Y ~ b` on the grid of
/// twice the half-width.
pub fn convolve(a: &GridDensity, b: &GridDensity) -> Result<GridDensity> {
    a.grid().ensure_same(b.grid())?;
    let dx = a.dx();
    let ext = a.grid().extended(2);
    let mut fa = padded_masses(a.values(), dx, ext.points());
    let mut fb = padded_masses(b.values(), dx, ext.points());
    forward(&mut fa);
    forward(&mut fb);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    inverse(&mut fa);
    let values = clean_densities(fa.iter().map(|z| z.re), dx)?;
    GridDensity::from_raw(ext, values).ensure_resolved()
}

/// `x -> a rho(a x)` sampled on `target`, renormalized. Target nodes whose
/// image `a x` falls on a source node take that value exactly; the rest are
/// linearly interpolated.
pub fn scale_onto(rho: &GridDensity, a: f64, target: &GridSpec) -> Result<GridDensity> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(KavgError::invalid(format!("scale factor must be > 0 (got {a})")));
    }
    let src = rho.grid();
    let last = (src.points() - 1) as f64;
    let vals = rho.values();
    let out = target
        .nodes()
        .map(|x| {
            let p = src.position(a * x);
            let r = p.round();
            if (p - r).abs() < 1e-9 {
                if (0.0..=last).contains(&r) {
                    a * vals[r as usize]
                } else {
                    0.0
                }
            } else if p < 0.0 || p > last {
                0.0
            } else {
                let i = p.floor() as usize;
                let t = p - i as f64;
                a * (vals[i] * (1.0 - t) + vals[i + 1] * t)
            }
        })
        .collect();
    GridDensity::normalized(*target, out)?.ensure_resolved()
}

/// `x -> a rho(a x)` on the density's own grid.
pub fn scale(rho: &GridDensity, a: f64) -> Result<GridDensity> {
    scale_onto(rho, a, rho.grid())
}

/// Translate by `h` (density of `X + h`), linear interpolation.
pub fn shift(rho: &GridDensity, h: f64) -> Result<GridDensity> {
    let out = rho.grid().nodes().map(|x| rho.value_at(x - h)).collect();
    GridDensity::normalized(*rho.grid(), out)?.ensure_resolved()
}

/// `phi_sigma * rho`, multiplying the spectrum by `exp(-sigma^2 xi^2 / 2)`.
/// The grid must resolve the kernel: `dx <= sigma / 5`.
pub fn gaussian_smooth(rho: &GridDensity, sigma: f64) -> Result<GridDensity> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(KavgError::invalid(format!("sigma must be > 0 (got {sigma})")));
    }
    let dx = rho.dx();
    let limit = sigma / 5.0;
    if dx > limit * (1.0 + 1e-12) {
        return Err(KavgError::UnderResolved { dx, limit });
    }
    let m = rho.grid().points();
    // Padding to 2M keeps mass leaving one edge from re-entering at the other.
    let n = 2 * m;
    let mut buf = padded_masses(rho.values(), dx, n);
    forward(&mut buf);
    let s2 = sigma * sigma;
    for (k, z) in buf.iter_mut().enumerate() {
        let xi = frequency(k, n, dx);
        *z *= (-0.5 * s2 * xi * xi).exp();
    }
    inverse(&mut buf);
    let values = clean_densities(buf[..m].iter().map(|z| z.re), dx)?;
    GridDensity::from_raw(*rho.grid(), values).ensure_resolved()
}

/// One step of the mean-field map, `T[rho] = phi_sigma * S_K[C_K[rho]]`.
pub fn apply_t(rho: &GridDensity, k: usize, sigma: f64) -> Result<GridDensity> {
    rho.check_tails(super::TAIL_THRESHOLD)?;
    let convolved = self_convolve(rho, k)?;
    // node K j of the extended grid is K x_j: S_K is a stride-K restriction
    let rescaled = scale_onto(&convolved, k as f64, rho.grid())?;
    gaussian_smooth(&rescaled, sigma)
}

/// `[rho^0, T[rho^0], ..., T^n[rho^0]]`.
pub fn iterate(rho0: &GridDensity, k: usize, sigma: f64, n_steps: usize) -> Result<Vec<GridDensity>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(rho0.clone());
    for _ in 0..n_steps {
        let next = apply_t(out.last().expect("nonempty"), k, sigma)?;
        out.push(next);
    }
    Ok(out)
}

/// Forward Euler for `d rho/dt = lambda (T[rho] - rho)` in mixture form
/// `rho(t + dt) = (1 - lambda dt) rho(t) + lambda dt T[rho(t)]`, calling `visit` at
/// `t = 0` and after every step. The last step is shortened to land on
/// `t_end`.
pub fn evolve_continuous_with(
    rho0: &GridDensity,
    k: usize,
    sigma: f64,
    lambda: f64,
    t_end: f64,
    dt: f64,
    mut visit: impl FnMut(f64, &GridDensity) -> Result<()>,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KavgError::invalid(format!("dt must be > 0 (got {dt})")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(KavgError::invalid(format!("t_end must be >= 0 (got {t_end})")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(KavgError::invalid(format!("lambda must be >= 0 (got {lambda})")));
    }
    if lambda * dt > MAX_LAMBDA_DT {
        return Err(KavgError::TimeStepTooLarge {
            value: lambda * dt,
            limit: MAX_LAMBDA_DT,
        });
    }
    let n_steps = if t_end == 0.0 {
        0
    } else {
        (t_end / dt - 1e-9).ceil() as usize
    };
    let mut rho = rho0.clone();
    let mut t = 0.0;
    visit(t, &rho)?;
    for i in 1..=n_steps {
        let t_next = (i as f64 * dt).min(t_end);
        let w = lambda * (t_next - t);
        if w > 0.0 {
            let target = apply_t(&rho, k, sigma)?;
            let mixed = rho
                .values()
                .iter()
                .zip(target.values())
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect();
            rho = GridDensity::normalized(*rho.grid(), mixed)?;
        }
        t = t_next;
        visit(t, &rho)?;
    }
    Ok(())
}

/// Collecting form of [`evolve_continuous_with`].
pub fn evolve_continuous(
    rho0: &GridDensity,
    k: usize,
    sigma: f64,
    lambda: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, GridDensity)>> {
    let mut out = Vec::new();
    evolve_continuous_with(rho0, k, sigma, lambda, t_end, dt, |t, rho| {
        out.push((t, rho.clone()));
        Ok(())
    })?;
    Ok(out)
}
