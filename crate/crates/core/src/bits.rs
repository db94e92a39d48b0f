//! Packed bit strings.
//!
//! All key material in the crate is a [`Bits`] value: a packed bit vector
//! where bit `i` lives in byte `i / 8` at position `i % 8`, least significant
//! bit first. That byte layout is also the wire format used by the FFI layer
//! and the broadcast log.

use bitvec::prelude::*;

use crate::rng::StreamRng;

pub type Bits = BitVec<u8, Lsb0>;

/// Build a bit string from bools, first element = bit 0.
pub fn from_bools(bools: &[bool]) -> Bits {
    let mut b = Bits::with_capacity(bools.len());
    b.extend(bools.iter().copied());
    b
}

/// Parse a compact `"0101..."` literal (test and log friendly).
pub fn from_str01(s: &str) -> Bits {
    s.chars()
        .map(|c| match c {
            '0' => false,
            '1' => true,
            _ => panic!("bit literal may contain only 0 and 1, got {c:?}"),
        })
        .collect()
}

/// Render as a `"0101..."` string, bit 0 first.
pub fn to_str01(bits: &Bits) -> String {
    bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

/// XOR of two equal-length bit strings.
pub fn xor(a: &Bits, b: &Bits) -> Bits {
    assert_eq!(a.len(), b.len(), "xor of unequal bit strings");
    let mut out = a.clone();
    out ^= b;
    out
}

/// `n` uniformly random bits.
pub fn random(n: usize, rng: &mut StreamRng) -> Bits {
    let mut b = Bits::with_capacity(n);
    for _ in 0..n {
        b.push(rng.bit());
    }
    b
}

/// Fraction of ones.
pub fn ones_fraction(bits: &Bits) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    bits.count_ones() as f64 / bits.len() as f64
}

/// Number of positions where the strings differ.
pub fn hamming_distance(a: &Bits, b: &Bits) -> usize {
    assert_eq!(a.len(), b.len(), "hamming distance of unequal bit strings");
    xor(a, b).count_ones()
}

/// Hex rendering of the packed bytes (LSB-first within each byte).
pub fn to_hex(bits: &Bits) -> String {
    let mut padded = bits.clone();
    padded.set_uninitialized(false);
    padded
        .as_raw_slice()
        .iter()
        .map(|byte| format!("{byte:02x}"))
        .collect()
}
