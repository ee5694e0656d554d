//! Continuous-time dynamics, simulated exactly event by event.
//!
//! Waiting times between rings are exponential with the total rate (`N
//! lambda` or `lambda`, see [`TotalRateMode`]). At a ring one particle,
//! chosen uniformly, is replaced by the mean of `K` particles drawn from the
//! pre-event state plus Gaussian noise.
//!
//! Snapshots are left-continuous in the sense that the state reported at
//! time `t` contains every event with time `<= t`.

use std::io::Write;

use crate::error::{KavgError, Result};
use crate::model::{ModelParams, NeighborRule, TotalRateMode};
use crate::particles::{write_snapshots, Ensemble};
use crate::rng::RandomSource;

/// Times and particle ids of all events, in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub times: Vec<f64>,
    pub particle_ids: Vec<usize>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Total ring rate of the population.
pub fn total_rate(params: &ModelParams) -> f64 {
    match params.rate_mode {
        TotalRateMode::PerParticle => params.n as f64 * params.lambda,
        TotalRateMode::Global => params.lambda,
    }
}

/// Simulate on `[0, t_end]`, returning the states at `snapshot_times` and
/// the event log.
pub fn simulate(
    ens0: &Ensemble,
    params: &ModelParams,
    t_end: f64,
    rng: &mut RandomSource,
    snapshot_times: &[f64],
) -> Result<(Vec<Ensemble>, EventLog)> {
    ens0.check(params)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(KavgError::invalid(format!("t_end must be >= 0 (got {t_end})")));
    }
    if snapshot_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(KavgError::invalid("snapshot times must be sorted"));
    }
    if snapshot_times.iter().any(|&s| !(0.0..=t_end).contains(&s)) {
        return Err(KavgError::invalid("snapshot times must lie in [0, t_end]"));
    }

    let (n, d, k) = (params.n, params.d, params.k);
    let rate = total_rate(params);
    let mut state = ens0.clone();
    let mut log = EventLog::default();
    let mut snaps = Vec::with_capacity(snapshot_times.len());
    let mut pending = snapshot_times.iter().peekable();
    let mut avg = vec![0.0; d];
    let mut t = 0.0;

    if rate > 0.0 {
        loop {
            t += rng.exponential(rate);
            while pending.next_if(|&&s| s < t).is_some() {
                snaps.push(state.clone());
            }
            if t > t_end {
                break;
            }
            let i = rng.index(n);
            avg.fill(0.0);
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
                for (a, x) in avg.iter_mut().zip(state.particle(j)) {
                    *a += x;
                }
            }
            let row = state.particle_mut(i);
            for (r, a) in row.iter_mut().zip(&avg) {
                *r = a / k as f64 + params.sigma * rng.standard_normal();
            }
            log.times.push(t);
            log.particle_ids.push(i);
        }
    }
    for _ in pending {
        snaps.push(state.clone());
    }
    Ok((snaps, log))
}

/// Snapshots keyed by time: `time,particle,coord0,...`.
pub fn write_time_snapshots<W: Write>(out: W, times: &[f64], snaps: &[Ensemble]) -> Result<()> {
    if times.len() != snaps.len() {
        return Err(KavgError::invalid("one time per snapshot expected"));
    }
    let rows: Vec<_> = times.iter().zip(snaps).map(|(t, e)| (format!("{t}"), e)).collect();
    write_snapshots(out, "time", &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{sample_variance, variance_with_se, MeanEstimate};

    fn uniform_ensemble(n: usize, rng: &mut RandomSource) -> Ensemble {
        Ensemble::from_points((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_rate_means_no_events() {
        let mut p = ModelParams::one_d(5, 0.1, 20).unwrap();
        p.lambda = 0.0;
        let mut rng = RandomSource::new(1, 0);
        let e = uniform_ensemble(20, &mut rng);
        let (snaps, log) = simulate(&e, &p, 3.0, &mut rng, &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(snaps, vec![e.clone(), e.clone(), e]);
        assert!(log.is_empty());
    }

    #[test]
    fn event_counts_match_poisson_mean() {
        let (n, lambda, t) = (50, 0.7, 4.0);
        let mut p = ModelParams::one_d(2, 0.1, n).unwrap();
        p.lambda = lambda;
        let e = Ensemble::from_points(vec![0.0; n]).unwrap();
        let counts: Vec<f64> = (0..200)
            .map(|r| {
                let mut rng = RandomSource::new(3, r);
                simulate(&e, &p, t, &mut rng, &[]).unwrap().1.len() as f64
            })
            .collect();
        let est = MeanEstimate::from_samples(&counts);
        assert!(est.within(n as f64 * lambda * t, 3.0), "{}", est.mean);

        p.rate_mode = TotalRateMode::Global;
        let counts: Vec<f64> = (0..200)
            .map(|r| {
                let mut rng = RandomSource::new(4, r);
                simulate(&e, &p, t, &mut rng, &[]).unwrap().1.len() as f64
            })
            .collect();
        assert!(MeanEstimate::from_samples(&counts).within(lambda * t, 3.0));
    }

    #[test]
    fn event_log_is_well_formed() {
        let p = ModelParams::one_d(3, 0.1, 30).unwrap();
        let mut rng = RandomSource::new(8, 0);
        let e = uniform_ensemble(30, &mut rng);
        let (_, log) = simulate(&e, &p, 5.0, &mut rng, &[]).unwrap();
        assert!(log.times.windows(2).all(|w| w[0] < w[1]));
        assert!(log.times.iter().all(|&t| t > 0.0 && t <= 5.0));
        assert!(log.particle_ids.iter().all(|&i| i < 30));
    }

    #[test]
    fn snapshots_include_events_up_to_their_time() {
        let p = ModelParams::one_d(2, 0.1, 10).unwrap();
        let mut rng = RandomSource::new(21, 0);
        let e = uniform_ensemble(10, &mut rng);
        let (_, log) = simulate(&e, &p, 2.0, &mut rng.clone(), &[]).unwrap();
        let t3 = log.times[3];
        let (snaps, _) = simulate(&e, &p, 2.0, &mut rng.clone(), &[t3, 2.0]).unwrap();
        // replay the first four events by hand from a shorter horizon
        let (upto, log4) = simulate(&e, &p, t3, &mut rng.clone(), &[t3]).unwrap();
        assert_eq!(log4.len(), 4);
        assert_eq!(snaps[0], upto[0]);
        assert_ne!(snaps[0], snaps[1]);
    }

    #[test]
    fn degenerate_start_stays_put() {
        let n = 8;
        let p = ModelParams::one_d(n, 1e-12, n).unwrap();
        let mut rng = RandomSource::new(2, 0);
        let e = Ensemble::from_points(vec![-0.25; n]).unwrap();
        let (snaps, log) = simulate(&e, &p, 1.0, &mut rng, &[0.25, 0.5, 1.0]).unwrap();
        assert!(!log.is_empty());
        for s in &snaps {
            assert!(s.positions().iter().all(|x| (x + 0.25).abs() < 1e-10));
        }
    }

    #[test]
    fn reproducible_per_stream() {
        let p = ModelParams::one_d(3, 0.1, 40).unwrap();
        let e = uniform_ensemble(40, &mut RandomSource::new(0, 0));
        let run = |s| simulate(&e, &p, 2.0, &mut RandomSource::new(5, s), &[1.0, 2.0]).unwrap();
        assert_eq!(run(1), run(1));
        assert_ne!(run(1).1, run(2).1);
    }

    #[test]
    fn mean_is_conserved_in_expectation() {
        let n = 200;
        let p = ModelParams::one_d(3, 0.1, n).unwrap();
        let mut init = RandomSource::new(77, 0);
        let e = Ensemble::from_points((0..n).map(|_| init.uniform(0.0, 1.0)).collect()).unwrap();
        let m0 = e.center_of_mass()[0];
        let drift: Vec<f64> = (0..200)
            .map(|r| {
                let mut rng = RandomSource::new(6, r);
                let (s, _) = simulate(&e, &p, 3.0, &mut rng, &[3.0]).unwrap();
                s[0].center_of_mass()[0] - m0
            })
            .collect();
        assert!(MeanEstimate::from_samples(&drift).within(0.0, 3.0));
    }

    #[test]
    fn relaxes_to_equilibrium_variance() {
        let n = 5000;
        let p = ModelParams::one_d(5, 0.1, n).unwrap();
        let mut rng = RandomSource::new(2024, 0);
        let e = uniform_ensemble(n, &mut rng);
        let (s, _) = simulate(&e, &p, 20.0, &mut rng, &[20.0]).unwrap();
        let xs = s[0].positions();
        let (v, se) = variance_with_se(xs);
        assert!((v - 0.0125).abs() <= 3.0 * se, "{v} +- {se}");
        assert!((sample_variance(xs) - v).abs() < 1e-5);
    }

    #[test]
    fn csv_uses_time_column() {
        let e = Ensemble::from_points(vec![0.5, 1.5]).unwrap();
        let mut buf = Vec::new();
        write_time_snapshots(&mut buf, &[0.25], &[e]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,particle,coord0\n0.25,0,"));
    }

    #[test]
    fn rejects_bad_snapshot_times() {
        let p = ModelParams::one_d(2, 0.1, 2).unwrap();
        let e = Ensemble::from_points(vec![0.0, 1.0]).unwrap();
        let mut rng = RandomSource::new(0, 0);
        assert!(simulate(&e, &p, 1.0, &mut rng, &[0.5, 0.2]).is_err());
        assert!(simulate(&e, &p, 1.0, &mut rng, &[1.5]).is_err());
        assert!(simulate(&e, &p, -1.0, &mut rng, &[]).is_err());
    }
}
