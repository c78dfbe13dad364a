//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a [`RandomStream`] keyed by
//! `(experiment seed, sample index, stream role)`. The underlying generator is
//! ChaCha8, whose 64-bit stream selector holds the sample index, so the
//! numbers consumed by sample `i` never depend on which worker evaluated it or
//! in which order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Purpose of a stream. Each role gets an independent key so that, e.g.,
/// adding jump sampling to an experiment does not perturb its Brownian paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamRole {
    Start = 1,
    Subordinator = 2,
    Brownian = 3,
    Jumps = 4,
    Auxiliary = 5,
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, index: u64, role: StreamRole) -> Self {
        let mut key = [0u8; 32];
        let words = [
            mix64(seed),
            mix64(seed ^ (role as u64).rotate_left(32)),
            mix64((role as u64) ^ 0x5851_f42d_4c95_7f2d),
            mix64(seed.wrapping_add(role as u64)),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        Self { rng }
    }

    /// Standard normal variate.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Unit-rate exponential variate.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// The four streams consumed by one path sample.
#[derive(Clone, Debug)]
pub struct SampleStreams {
    pub start: RandomStream,
    pub subordinator: RandomStream,
    pub brownian: RandomStream,
    pub jumps: RandomStream,
}

impl SampleStreams {
    pub fn new(seed: u64, index: u64) -> Self {
        Self {
            start: RandomStream::new(seed, index, StreamRole::Start),
            subordinator: RandomStream::new(seed, index, StreamRole::Subordinator),
            brownian: RandomStream::new(seed, index, StreamRole::Brownian),
            jumps: RandomStream::new(seed, index, StreamRole::Jumps),
        }
    }
}
