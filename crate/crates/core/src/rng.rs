//! Deterministic counter-based random source.
//!
//! A [`RandomSource`] is a ChaCha8 keystream keyed by a 64-bit seed, with a
//! 64-bit stream id (one per replica). Sequential draws walk the keystream
//! from counter zero. [`RandomSource::substream`] jumps to an isolated
//! counter window on a disjoint ChaCha stream, so that parallel work items
//! keyed by `(replica, slot)` draw from non-overlapping keystream ranges.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Words (u32) of keystream reserved for each substream slot.
const SLOT_BITS: u32 = 20;

/// Highest bit of the ChaCha stream id marks slot-addressed substreams.
const SLOT_STREAM_FLAG: u64 = 1 << 63;

#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    /// Replica streams must stay below `2^63`; the top bit is reserved.
    pub fn new(seed: u64, stream: u64) -> Self {
        assert!(stream < SLOT_STREAM_FLAG, "stream id must be < 2^63");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent source for work item `slot` of this replica. Each slot owns
    /// `2^20` keystream words; slots never overlap each other or the
    /// sequential stream.
    pub fn substream(&self, slot: u64) -> RandomSource {
        assert!(slot < (1 << (68 - SLOT_BITS)), "substream slot out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream | SLOT_STREAM_FLAG);
        rng.set_word_pos(u128::from(slot) << SLOT_BITS);
        RandomSource {
            seed: self.seed,
            stream: self.stream,
            rng,
        }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Exponential waiting time with the given rate (`rate > 0`).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        // 1 - U lies in (0, 1], so the log is finite.
        let u: f64 = self.rng.random();
        -(1.0 - u).ln() / rate
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// One draw from `N(0, sigma^2 I_d)`.
pub fn gaussian_noise(rng: &mut RandomSource, d: usize, sigma: f64) -> Vec<f64> {
    (0..d).map(|_| sigma * rng.standard_normal()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_reproduce() {
        let mut a = RandomSource::new(42, 3);
        let mut b = RandomSource::new(42, 3);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_eq!(
            gaussian_noise(&mut RandomSource::new(7, 0), 3, 0.1),
            gaussian_noise(&mut RandomSource::new(7, 0), 3, 0.1)
        );
    }

    #[test]
    fn distinct_streams_and_slots_differ() {
        let a = RandomSource::new(42, 0).next_u64();
        let b = RandomSource::new(42, 1).next_u64();
        assert_ne!(a, b);
        let base = RandomSource::new(42, 0);
        let s0 = base.substream(0).next_u64();
        let s1 = base.substream(1).next_u64();
        assert_ne!(s0, s1);
        assert_ne!(s0, a);
    }

    #[test]
    fn substream_is_pure_function_of_slot() {
        let base = RandomSource::new(9, 5);
        let mut moved = base.clone();
        for _ in 0..100 {
            moved.next_u64();
        }
        assert_eq!(base.substream(17).next_u64(), moved.substream(17).next_u64());
    }

    #[test]
    fn noise_moments_over_a_million_draws() {
        let sigma = 0.1;
        let n = 1_000_000;
        let mut rng = RandomSource::new(2024, 0);
        let draws: Vec<f64> = (0..n).map(|_| gaussian_noise(&mut rng, 1, sigma)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // CLT: sd of the mean is sigma/1000.
        assert!(mean.abs() < 4.0 * sigma / 1e3, "mean {mean}");
        // chi-square: relative sd of the variance is sqrt(2/n) ~ 1.4e-3.
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn exponential_mean() {
        let mut rng = RandomSource::new(1, 0);
        let n = 200_000;
        let rate = 4.0;
        let mean = (0..n).map(|_| rng.exponential(rate)).sum::<f64>() / n as f64;
        // sd of the mean = 1/(rate sqrt(n)) ~ 5.6e-4
        assert!((mean - 0.25).abs() < 4.0 * 0.25 / (n as f64).sqrt());
    }
}
