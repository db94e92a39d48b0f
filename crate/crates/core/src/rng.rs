//! Deterministic, splittable random streams.
//!
//! Every stochastic operation in this crate takes an explicit [`StreamRng`].
//! Child streams are derived from the parent's *seed* and a label, never from
//! its draw position, so the substream layout is independent of how much the
//! parent has already been consumed. Two stations given distinct labels draw
//! from fully disjoint ChaCha streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; mixes a 64-bit value into a well-distributed one.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a over the UTF-8 bytes of a label.
fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A seeded ChaCha12 stream that can split off independent children.
#[derive(Debug, Clone)]
pub struct StreamRng {
    seed: u64,
    rng: ChaCha12Rng,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(splitmix64(seed)),
        }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child stream from a numeric label.
    ///
    /// Depends only on the parent's seed, not on its draw position.
    pub fn substream(&self, label: u64) -> StreamRng {
        StreamRng::new(splitmix64(self.seed ^ label.wrapping_mul(GOLDEN)))
    }

    /// Derive an independent child stream from a string label.
    pub fn substream_named(&self, name: &str) -> StreamRng {
        self.substream(fnv1a(name))
    }

    /// One standard-normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut self.rng)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Rejection sampling to avoid modulo bias.
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// One fair random bit.
    pub fn bit(&mut self) -> bool {
        self.rng.next_u64() & 1 == 1
    }

    /// Fisher-Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
        p
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest);
    }
}
