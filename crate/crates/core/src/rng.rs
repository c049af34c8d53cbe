//! Reproducible parallel Monte Carlo.
//!
//! Samples are grouped into fixed-size chunks. Chunk `c` of a run with seed
//! `s` draws from the ChaCha8 stream `c` keyed by `s`, so every sample is a
//! pure function of `(seed, chunk, position)`. Chunk accumulators are merged
//! in chunk order, which makes results bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;

pub const CHUNK_SAMPLES: u64 = 4096;

/// Generator for chunk `chunk` of a run keyed by `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `sample` once per sample index and folds the per-chunk accumulators
/// in chunk order.
pub fn run_chunked<A, I, S, M>(n_samples: u64, seed: u64, init: I, sample: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut ChaCha8Rng, &mut A) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = n_samples.div_ceil(CHUNK_SAMPLES);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut acc = init();
            let len = CHUNK_SAMPLES.min(n_samples - c * CHUNK_SAMPLES);
            for _ in 0..len {
                sample(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// Runs `f` on a dedicated pool of `threads` workers (`None` or 0: rayon's
/// default pool).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Event hits for probability estimates; samples used for means.
    pub hits: u64,
}

impl McEstimate {
    /// Binomial estimate `p̂ = hits/n` with `√(p̂(1−p̂)/n)`.
    pub fn from_hits(hits: u64, n_samples: u64, seed: u64) -> Self {
        let p = if n_samples == 0 { 0.0 } else { hits as f64 / n_samples as f64 };
        McEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / n_samples.max(1) as f64).sqrt(),
            n_samples,
            seed,
            hits,
        }
    }

    pub fn from_mean(acc: &MeanAcc, seed: u64) -> Self {
        let n = acc.n.max(1) as f64;
        let mean = acc.sum.value() / n;
        let var = (acc.sum_sq.value() / n - mean * mean).max(0.0);
        McEstimate {
            estimate: mean,
            std_error: (var / n).sqrt(),
            n_samples: acc.n,
            seed,
            hits: acc.n,
        }
    }

    /// Multiplies estimate and standard error by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        McEstimate {
            estimate: self.estimate * factor,
            std_error: self.std_error * factor,
            ..self
        }
    }

    /// `|estimate − target| ≤ sigmas · std_error`.
    pub fn agrees_with(&self, target: f64, sigmas: f64) -> bool {
        (self.estimate - target).abs() <= sigmas * self.std_error
    }
}

/// Compensated running mean and second moment.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAcc {
    pub sum: CompensatedSum,
    pub sum_sq: CompensatedSum,
    pub n: u64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.n += 1;
    }

    pub fn merge(&mut self, other: MeanAcc) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.n += other.n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn mean_of_uniforms(n: u64, seed: u64) -> McEstimate {
        let acc = run_chunked(
            n,
            seed,
            MeanAcc::default,
            |rng, acc| acc.push(rng.random::<f64>()),
            |a, b| a.merge(b),
        );
        McEstimate::from_mean(&acc, seed)
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let one = with_threads(Some(1), || mean_of_uniforms(100_003, 5));
        let four = with_threads(Some(4), || mean_of_uniforms(100_003, 5));
        assert_eq!(one, four);
        assert_eq!(one.n_samples, 100_003);
    }

    #[test]
    fn chunks_use_distinct_streams() {
        let a: u64 = chunk_rng(1, 0).random();
        let b: u64 = chunk_rng(1, 1).random();
        let c: u64 = chunk_rng(2, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn binomial_errors() {
        let e = McEstimate::from_hits(25, 100, 0);
        assert_eq!(e.estimate, 0.25);
        assert!((e.std_error - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(McEstimate::from_hits(100, 100, 0).std_error, 0.0);
        assert!(e.agrees_with(0.3, 2.0));
        assert!(!e.agrees_with(0.5, 4.0));
    }
}
