//! Quantum random number generation from vacuum homodyne measurements.
//!
//! The transmitter measures an unmodulated (vacuum) mode, takes the sign of
//! each quadrature outcome, and von-Neumann-unbiases sign pairs. Samples
//! inside a small dead band around zero are discarded so the sign is never
//! decided by floating-point round-off.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::phase_space::{self, CoherentState, CONVENTION};
use crate::rng::StreamRng;

/// Dead band around zero, in shot-noise units. A vacuum outcome lands inside
/// with probability ~8e-7, so discards are rare but accounted for.
pub const DEAD_BAND: f64 = 1e-6;

/// Origin of a bit buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitSource {
    Qrng,
    External,
}

/// Packed random bits plus generation bookkeeping.
#[derive(Debug, Clone)]
pub struct BitBuffer {
    pub bits: Bits,
    pub source: BitSource,
    /// Homodyne samples drawn to produce the buffer.
    pub samples_consumed: u64,
    /// Samples rejected by the dead band.
    pub discarded: u64,
}

impl BitBuffer {
    /// Wrap externally supplied bits (tests, replay).
    pub fn external(bits: Bits) -> Self {
        BitBuffer {
            bits,
            source: BitSource::External,
            samples_consumed: 0,
            discarded: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Generate exactly `n_bits` unbiased random bits from vacuum homodyne signs.
///
/// Draws sign bits from vacuum outcomes and applies von Neumann unbiasing
/// over consecutive pairs: `01 -> 0`, `10 -> 1`, equal pairs rejected.
/// Loops until the requested count is reached; termination is almost sure.
pub fn vacuum_bits(n_bits: usize, rng: &mut StreamRng) -> BitBuffer {
    let mut bits = Bits::with_capacity(n_bits);
    let mut samples_consumed = 0u64;
    let mut discarded = 0u64;

    let mut draw_sign = |consumed: &mut u64, rejected: &mut u64| -> bool {
        loop {
            let x = phase_space::homodyne_draw_with_variance(
                CoherentState::VACUUM,
                0.0,
                CONVENTION.shot_noise_variance,
                rng,
            );
            *consumed += 1;
            if x.abs() < DEAD_BAND {
                *rejected += 1;
                continue;
            }
            return x < 0.0;
        }
    };

    while bits.len() < n_bits {
        let first = draw_sign(&mut samples_consumed, &mut discarded);
        let second = draw_sign(&mut samples_consumed, &mut discarded);
        if first != second {
            bits.push(first);
        }
    }

    BitBuffer {
        bits,
        source: BitSource::Qrng,
        samples_consumed,
        discarded,
    }
}

/// Fraction of ones in the buffer.
pub fn bias_estimate(buf: &BitBuffer) -> Result<f64> {
    if buf.bits.is_empty() {
        return Err(Error::EmptyBitBuffer);
    }
    Ok(buf.bits.count_ones() as f64 / buf.bits.len() as f64)
}

/// Lag-1 serial correlation of a bit string (test statistic for the
/// randomness checks; ~Normal(0, 1/n) under independence).
pub fn lag1_correlation(bits: &Bits) -> f64 {
    let n = bits.len();
    if n < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let d = xs[i] - mean;
        den += d * d;
        if i + 1 < n {
            num += d * (xs[i + 1] - mean);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
