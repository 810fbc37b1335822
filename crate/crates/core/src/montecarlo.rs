//! Chunked, reproducible Monte Carlo.
//!
//! Samples are split into fixed-size chunks. Chunk `k` draws from its own
//! ChaCha stream derived from `(seed, k)`, so results depend only on the seed
//! and the sample count, never on how chunks are scheduled across workers.
//! Chunk partials are merged in chunk order with compensated summation.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const CHUNK_SIZE: u64 = 1 << 14;

/// Runs a closure once per chunk index and returns the results in order.
pub trait Executor: Sync {
    fn map_chunks<T, F>(&self, chunks: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Single-threaded executor.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_chunks<T, F>(&self, chunks: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..chunks).map(f).collect()
    }
}

/// Independent generator for one chunk of a seeded run.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }
}

/// Running mean and standard error of a scalar estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.count as f64
    }

    /// Sample variance (Bessel-corrected).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        libm::sqrt(self.variance() / self.count as f64)
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean(),
            std_error: self.std_error(),
            samples: self.count,
        }
    }
}

/// Mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    /// `|value - target|` in units of the standard error, with `floor` added to
    /// the error to absorb floating-point noise on exactly-determined estimators.
    pub fn sigmas_from(&self, target: f64, floor: f64) -> f64 {
        (self.value - target).abs() / (self.std_error + floor)
    }
}

/// Averages `f(rng)` over `samples` draws, chunked and seeded as described in
/// the module docs.
pub fn estimate_mean<E, F>(executor: &E, samples: u64, seed: u64, f: F) -> Estimate
where
    E: Executor + ?Sized,
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let partials = accumulate_chunks(executor, samples, seed, |rng, acc: &mut MeanAccumulator| {
        acc.push(f(rng))
    });
    let mut total = MeanAccumulator::default();
    for p in &partials {
        total.merge(p);
    }
    total.estimate()
}

/// Runs `step` `samples` times over per-chunk accumulators and returns one
/// accumulator per chunk, in chunk order.
pub fn accumulate_chunks<E, A, F>(executor: &E, samples: u64, seed: u64, step: F) -> Vec<A>
where
    E: Executor + ?Sized,
    A: Default + Send,
    F: Fn(&mut ChaCha8Rng, &mut A) + Sync + Send,
{
    let chunks = samples.div_ceil(CHUNK_SIZE);
    executor.map_chunks(chunks, |k| {
        let mut rng = chunk_rng(seed, k);
        let start = k * CHUNK_SIZE;
        let len = CHUNK_SIZE.min(samples - start);
        let mut acc = A::default();
        for _ in 0..len {
            step(&mut rng, &mut acc);
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-13).abs() < 1e-20);
    }

    #[test]
    fn mean_and_error_of_uniform() {
        let est = estimate_mean(&Sequential, 200_000, 3, |rng| rng.gen::<f64>());
        assert!((est.value - 0.5).abs() < 5.0 * est.std_error);
        let expected_se = libm::sqrt(1.0 / 12.0 / 200_000.0);
        assert!((est.std_error / expected_se - 1.0).abs() < 0.01);
        assert_eq!(est.samples, 200_000);
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = estimate_mean(&Sequential, 50_000, 9, |rng| rng.gen::<f64>());
        let b = estimate_mean(&Sequential, 50_000, 9, |rng| rng.gen::<f64>());
        let c = estimate_mean(&Sequential, 50_000, 10, |rng| rng.gen::<f64>());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn partial_last_chunk() {
        let n = CHUNK_SIZE * 2 + 17;
        let est = estimate_mean(&Sequential, n, 1, |_| 1.0);
        assert_eq!(est.samples, n);
        assert_eq!(est.value, 1.0);
    }
}
