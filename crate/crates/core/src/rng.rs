//! Seeded sampling.
//!
//! Every sampling suite draws from [`SampleRng`], a SplitMix64 generator
//! (64-bit state). Independent streams are derived with [`SampleRng::split`],
//! which hashes the parent seed together with a stream label, so adding a
//! suite never perturbs the draws of another.

use nalgebra::DVector;
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct SampleRng {
    seed: u64,
    inner: SplitMix64,
}

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream keyed by `stream`.
    pub fn split(&self, stream: u64) -> Self {
        let mut mixer = SplitMix64::seed_from_u64(self.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Self::new(mixer.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform point in the closed ball of the given radius (rejection from the cube).
    pub fn in_ball(&mut self, dim: usize, radius: f64) -> DVector<f64> {
        loop {
            let v = DVector::from_fn(dim, |_, _| self.range(-1.0, 1.0));
            if v.norm_squared() <= 1.0 {
                return v * radius;
            }
        }
    }

    /// Uniform unit vector.
    pub fn direction(&mut self, dim: usize) -> DVector<f64> {
        loop {
            let v = self.in_ball(dim, 1.0);
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }
}
