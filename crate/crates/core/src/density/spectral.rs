use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{CLIP_BUDGET, NOISE_FLOOR};
use crate::error::{KavgError, Result};

/// Node masses `rho_j dx` copied into a zero-padded complex buffer of length `len`.
pub(super) fn padded_masses(values: &[f64], dx: f64, len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, v) in buf.iter_mut().zip(values) {
        b.re = v * dx;
    }
    buf
}

pub(super) fn forward(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// Inverse transform including the `1/n` factor.
pub(super) fn inverse(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
    let inv = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z *= inv);
}

/// Angular frequency of DFT bin `k` for `n` samples spaced `dx` apart.
pub(super) fn frequency(k: usize, n: usize, dx: f64) -> f64 {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * signed / (n as f64 * dx)
}

/// `z^k` by repeated squaring.
pub(super) fn powi(z: Complex64, mut k: usize) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut base = z;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

/// Turns inverse-transformed node masses back into density values: drops
/// round-off below the noise floor, clips negatives (failing when their mass
/// exceeds [`CLIP_BUDGET`]) and rescales to unit mass.
pub(super) fn clean_densities(masses: impl Iterator<Item = f64>, dx: f64) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = masses.map(|m| m / dx).collect();
    let peak = values.iter().cloned().fold(0.0_f64, f64::max);
    let floor = NOISE_FLOOR * peak;
    let mut clipped = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            clipped -= *v;
            *v = 0.0;
        } else if *v < floor {
            *v = 0.0;
        }
    }
    let clipped = clipped * dx;
    if clipped > CLIP_BUDGET {
        return Err(KavgError::ConvolutionAccuracy {
            clipped,
            budget: CLIP_BUDGET,
        });
    }
    let mass = dx * values.iter().sum::<f64>();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(KavgError::InvalidDensity(format!("spectral step produced mass {mass}")));
    }
    let inv = 1.0 / mass;
    values.iter_mut().for_each(|v| *v *= inv);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_repeated_product() {
        let z = Complex64::new(0.3, -0.7);
        let mut expect = Complex64::new(1.0, 0.0);
        for k in 0..12 {
            assert!((powi(z, k) - expect).norm() < 1e-14);
            expect *= z;
        }
    }

    #[test]
    fn frequencies_are_signed() {
        assert_eq!(frequency(0, 8, 1.0), 0.0);
        assert!(frequency(1, 8, 1.0) > 0.0);
        assert!(frequency(7, 8, 1.0) < 0.0);
        assert!((frequency(7, 8, 1.0) + frequency(1, 8, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn clean_fails_loudly_on_large_negative_mass() {
        let masses = vec![0.5, -0.01, 0.5];
        assert!(matches!(
            clean_densities(masses.into_iter(), 1.0),
            Err(KavgError::ConvolutionAccuracy { .. })
        ));
    }
}
