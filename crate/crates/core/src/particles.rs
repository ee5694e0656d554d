//! Finite-`N` discrete-time dynamics.
//!
//! Every step, each particle draws `K` neighbor indices i.i.d. uniform over
//! the population (with replacement, itself included unless the params say
//! otherwise), moves to their mean and adds `N(0, sigma^2 I_d)` noise. All
//! particles read the same step-`n` snapshot.
//!
//! Randomness for particle `i` at step `n` comes from the substream
//! `n * N + i` of the replica's [`RandomSource`], so a trajectory does not
//! depend on how the step is split across threads.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{KavgError, Result};
use crate::model::{ModelParams, NeighborRule};
use crate::rng::RandomSource;

/// Particles per rayon work item.
const MIN_CHUNK: usize = 256;

/// Positions of `N` particles in `R^d` (row-major) at step `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    positions: Vec<f64>,
    n: usize,
    d: usize,
    step: u64,
}

impl Ensemble {
    pub fn new(positions: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(KavgError::invalid("ensemble needs N >= 1 and d >= 1"));
        }
        if positions.len() != n * d {
            return Err(KavgError::invalid(format!(
                "expected {} coordinates for N = {n}, d = {d}, got {}",
                n * d,
                positions.len()
            )));
        }
        if let Some(bad) = positions.iter().find(|x| !x.is_finite()) {
            return Err(KavgError::invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self {
            positions,
            n,
            d,
            step: 0,
        })
    }

    /// One-dimensional ensemble.
    pub fn from_points(xs: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        Self::new(xs, n, 1)
    }

    pub fn at_step(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub(crate) fn particle_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.d..(i + 1) * self.d]
    }

    /// All values of coordinate `c`.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.positions.iter().skip(c).step_by(self.d).copied().collect()
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        self.empirical_measure().mean()
    }

    pub fn empirical_measure(&self) -> EmpiricalMeasure<'_> {
        EmpiricalMeasure { ens: self }
    }

    pub(crate) fn check(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        if self.n != params.n || self.d != params.d {
            return Err(KavgError::invalid(format!(
                "ensemble is {}x{} but params say N = {}, d = {}",
                self.n, self.d, params.n, params.d
            )));
        }
        Ok(())
    }
}

/// The empirical measure `(1/N) sum_i delta_{X_i}` of an ensemble.
#[derive(Clone, Copy, Debug)]
pub struct EmpiricalMeasure<'a> {
    ens: &'a Ensemble,
}

/// Bin probabilities of a 1-D histogram; bin `b` covers
/// `[start + b*width, start + (b+1)*width)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub start: f64,
    pub width: f64,
    pub weights: Vec<f64>,
}

impl<'a> EmpiricalMeasure<'a> {
    pub fn len(&self) -> usize {
        self.ens.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mass(&self) -> f64 {
        1.0
    }

    pub fn samples(&self, c: usize) -> Vec<f64> {
        self.ens.coordinate(c)
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.ens.d;
        let mut acc = vec![0.0; d];
        for row in self.ens.positions.chunks_exact(d) {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x;
            }
        }
        acc.iter().map(|a| a / self.ens.n as f64).collect()
    }

    /// `<mu, f>`.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.ens.positions.chunks_exact(self.ens.d).map(f).sum::<f64>() / self.ens.n as f64
    }

    /// Histogram of coordinate `c` with bins of width `h` aligned to
    /// multiples of `h`.
    pub fn histogram(&self, c: usize, h: f64) -> Result<Histogram> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(KavgError::invalid(format!("bin width must be > 0 (got {h})")));
        }
        let xs = self.samples(c);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = (lo / h).floor() * h;
        let bins = ((hi - start) / h).floor() as usize + 1;
        let mut weights = vec![0.0; bins];
        let w = 1.0 / xs.len() as f64;
        for x in xs {
            let b = (((x - start) / h).floor() as usize).min(bins - 1);
            weights[b] += w;
        }
        Ok(Histogram {
            start,
            width: h,
            weights,
        })
    }
}

/// One synchronous step; the input is left untouched.
pub fn step(ens: &Ensemble, params: &ModelParams, rng: &RandomSource) -> Result<Ensemble> {
    ens.check(params)?;
    let base = ens.step * ens.n as u64;
    Ok(step_with(ens, params, |i| rng.substream(base + i as u64), |j| j))
}

/// Core update. `source(i)` supplies particle `i`'s randomness and
/// `relabel` maps each drawn index to the particle it refers to.
pub(crate) fn step_with<S, R>(ens: &Ensemble, params: &ModelParams, source: S, relabel: R) -> Ensemble
where
    S: Fn(usize) -> RandomSource + Sync,
    R: Fn(usize) -> usize + Sync,
{
    let (n, d, k) = (ens.n, ens.d, params.k);
    let old = &ens.positions;
    let mut next = vec![0.0; n * d];
    next.par_chunks_mut(d)
        .with_min_len(MIN_CHUNK)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = source(i);
            for _ in 0..k {
                let j = match params.neighbors {
                    NeighborRule::WithSelf => rng.index(n),
                    NeighborRule::ExcludeSelf => {
                        let j = rng.index(n - 1);
                        if j >= i {
                            j + 1
                        } else {
                            j
                        }
                    }
                };
                let j = relabel(j);
                for (r, x) in row.iter_mut().zip(&old[j * d..(j + 1) * d]) {
                    *r += x;
                }
            }
            for r in row.iter_mut() {
                *r = *r / k as f64 + params.sigma * rng.standard_normal();
            }
        });
    Ensemble {
        positions: next,
        n,
        d,
        step: ens.step + 1,
    }
}

/// Advance `n_steps` steps, keeping every `record_every`-th snapshot and
/// always the last one.
pub fn run(
    ens0: &Ensemble,
    params: &ModelParams,
    n_steps: u64,
    rng: &RandomSource,
    record_every: u64,
) -> Result<Vec<Ensemble>> {
    run_with(ens0, params, n_steps, rng, record_every, |_| Ok(()))
}

/// Like [`run`], also calling `visit` on every intermediate state.
pub fn run_with(
    ens0: &Ensemble,
    params: &ModelParams,
    n_steps: u64,
    rng: &RandomSource,
    record_every: u64,
    mut visit: impl FnMut(&Ensemble) -> Result<()>,
) -> Result<Vec<Ensemble>> {
    if record_every == 0 {
        return Err(KavgError::invalid("record_every must be >= 1"));
    }
    ens0.check(params)?;
    visit(ens0)?;
    let mut out = vec![ens0.clone()];
    let mut cur = ens0.clone();
    for s in 1..=n_steps {
        cur = step(&cur, params, rng)?;
        visit(&cur)?;
        if s % record_every == 0 || s == n_steps {
            out.push(cur.clone());
        }
    }
    Ok(out)
}

/// Center-of-mass increments `C_{n+1} - C_n` along a trajectory recorded at
/// every step.
pub fn center_of_mass_increments(trajectory: &[Ensemble]) -> Result<Vec<Vec<f64>>> {
    if trajectory.len() < 2 {
        return Err(KavgError::Trajectory(format!(
            "need at least 2 snapshots, got {}",
            trajectory.len()
        )));
    }
    let mut out = Vec::with_capacity(trajectory.len() - 1);
    for w in trajectory.windows(2) {
        if w[1].step != w[0].step + 1 {
            return Err(KavgError::Trajectory(format!(
                "snapshots at steps {} and {} are not consecutive",
                w[0].step, w[1].step
            )));
        }
        let (a, b) = (w[0].center_of_mass(), w[1].center_of_mass());
        out.push(b.iter().zip(&a).map(|(b, a)| b - a).collect());
    }
    Ok(out)
}

/// Write snapshots as `<label>,particle,coord0,...` rows, `label` being
/// `step` or `time`.
pub fn write_snapshots<W: Write>(out: W, label: &str, rows: &[(String, &Ensemble)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = rows.first().map_or(1, |(_, e)| e.d);
    let mut header = vec![label.to_string(), "particle".to_string()];
    header.extend((0..d).map(|c| format!("coord{c}")));
    w.write_record(&header)?;
    for (t, ens) in rows {
        if ens.d != d {
            return Err(KavgError::invalid("snapshots of different dimensions"));
        }
        for i in 0..ens.n {
            let mut rec = vec![t.clone(), i.to_string()];
            rec.extend(ens.particle(i).iter().map(|x| format!("{x:e}")));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Discrete-time snapshots keyed by step.
pub fn write_step_snapshots<W: Write>(out: W, snaps: &[Ensemble]) -> Result<()> {
    let rows: Vec<_> = snaps.iter().map(|e| (e.step.to_string(), e)).collect();
    write_snapshots(out, "step", &rows)
}

/// Read the last snapshot of a file written by [`write_snapshots`].
pub fn read_last_snapshot<R: BufRead>(input: R) -> Result<Ensemble> {
    let mut rdr = csv::Reader::from_reader(input);
    let d = rdr.headers()?.len().saturating_sub(2);
    if d == 0 {
        return Err(KavgError::Parse("snapshot file has no coordinate columns".into()));
    }
    let mut label = None;
    let mut positions = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let t = rec[0].to_string();
        if label.as_ref() != Some(&t) {
            label = Some(t);
            positions.clear();
        }
        for field in rec.iter().skip(2) {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| KavgError::Parse(format!("bad coordinate {field:?}")))?;
            positions.push(x);
        }
    }
    let n = positions.len() / d;
    Ensemble::new(positions, n, d)
}
