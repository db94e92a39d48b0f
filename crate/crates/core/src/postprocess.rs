//! Classical key distillation: sign-bit extraction, Cascade information
//! reconciliation with exact leakage accounting, and Toeplitz privacy
//! amplification.
//!
//! Reconciliation is reverse: Bob's bits are the reference and Alice's are
//! corrected toward them, consistent with the beam-splitter security model
//! in [`crate::protocol`]. Every disclosed parity bit is counted and logged
//! in a transcript, so leakage is auditable message by message.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::phase_space::QuadratureBatch;
use crate::rng::StreamRng;

/// Identifies one key frame: which station produced it and at which step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FrameId {
    pub station: u32,
    pub step: u64,
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}.t{}", self.station, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyStage {
    Raw,
    Reconciled,
    Amplified,
}

impl KeyStage {
    fn name(self) -> &'static str {
        match self {
            KeyStage::Raw => "raw",
            KeyStage::Reconciled => "reconciled",
            KeyStage::Amplified => "amplified",
        }
    }
}

/// Aligned bit strings moving through the distillation pipeline.
///
/// `alice_bits` and `bob_bits` always have equal length; once the stage is
/// `Reconciled` they are bit-identical (enforced by a disclosed verification
/// hash, never assumed). `leakage_bits` only ever grows.
#[derive(Debug, Clone)]
pub struct KeyFrame {
    pub frame_id: FrameId,
    pub alice_bits: Bits,
    pub bob_bits: Bits,
    pub stage: KeyStage,
    pub leakage_bits: u64,
}

impl KeyFrame {
    pub fn raw(frame_id: FrameId, alice_bits: Bits, bob_bits: Bits) -> Self {
        assert_eq!(
            alice_bits.len(),
            bob_bits.len(),
            "key frame halves must have equal length"
        );
        KeyFrame {
            frame_id,
            alice_bits,
            bob_bits,
            stage: KeyStage::Raw,
            leakage_bits: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.alice_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice_bits.is_empty()
    }

    /// Fraction of positions where the two halves disagree.
    pub fn bit_error_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        crate::bits::hamming_distance(&self.alice_bits, &self.bob_bits) as f64 / self.len() as f64
    }
}

/// Turn the undisclosed symbols into a raw key frame.
///
/// Alice's bit is the transmitted bit; Bob decides by sign (`sample < 0`
/// reads as 1, matching the alphabet's `bit 0 -> +alpha` convention). The
/// key indices must be disjoint from the disclosed estimation set.
pub fn extract_raw(
    tx_record: &Bits,
    rx_batch: &QuadratureBatch,
    key_indices: &[usize],
    estimation_indices: &[usize],
    frame_id: FrameId,
) -> Result<KeyFrame> {
    let len = tx_record.len().min(rx_batch.samples.len());
    let disclosed: HashSet<usize> = estimation_indices.iter().copied().collect();
    let mut alice = Bits::with_capacity(key_indices.len());
    let mut bob = Bits::with_capacity(key_indices.len());
    for &i in key_indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if disclosed.contains(&i) {
            return Err(Error::IndexOverlap(i));
        }
        alice.push(tx_record[i]);
        bob.push(rx_batch.samples[i] < 0.0);
    }
    Ok(KeyFrame::raw(frame_id, alice, bob))
}

/// Pass index reserved for verification-hash disclosures in transcripts.
pub const VERIFICATION_PASS: u32 = 0;

/// Width of the disclosed verification hash (capped by the frame length).
pub const VERIFICATION_HASH_BITS: usize = 64;

/// One disclosed message of the reconciliation dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranscriptRecord {
    pub frame_id: FrameId,
    /// Cascade pass, 1-based; [`VERIFICATION_PASS`] for hash bits.
    pub pass: u32,
    /// Block within the pass; hash bit index for verification records.
    pub block: u32,
    pub parity: bool,
}

/// Ordered log of every disclosed bit; its length is the leakage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn leakage_bits(&self) -> u64 {
        self.records.len() as u64
    }

    /// Line-delimited export: `frame_id,pass,block,parity` per record.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.frame_id,
                r.pass,
                r.block,
                u8::from(r.parity)
            ));
        }
        out
    }
}

/// Maximum raw bit error rate Cascade will attempt.
pub const MAX_RECONCILE_BER: f64 = 0.25;

struct PassLayout {
    /// Shuffled slot -> position map (identity on pass 1).
    perm: Vec<usize>,
    /// Position -> slot.
    inv: Vec<usize>,
    block_size: usize,
    n_blocks: usize,
}

impl PassLayout {
    fn block_slots(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.block_size;
        let end = (start + self.block_size).min(self.perm.len());
        start..end
    }

    fn block_of(&self, pos: usize) -> usize {
        self.inv[pos] / self.block_size
    }
}

/// Interactive parity-exchange error correction (Cascade).
///
/// Pass 1 works on blocks of `initial_block` bits in natural order; each
/// later pass doubles the block size and works on a freshly shuffled order.
/// A block whose disclosed parity disagrees is binary-searched (one
/// disclosed parity per halving) down to a single bit, which is flipped in
/// Alice's string; every flip re-checks all previously disclosed blocks and
/// cascades until no known block disagrees. A disclosed Toeplitz hash
/// verifies the result; on mismatch the frame is flagged failed, never
/// returned silently unequal.
///
/// Returns the reconciled frame and the full disclosure transcript;
/// `leakage_bits` equals the transcript length exactly.
pub fn cascade_reconcile(
    frame: KeyFrame,
    passes: usize,
    initial_block: usize,
    rng: &mut StreamRng,
) -> Result<(KeyFrame, Transcript)> {
    if frame.stage != KeyStage::Raw {
        return Err(Error::WrongStage {
            expected: "raw",
            got: frame.stage.name(),
        });
    }
    if passes == 0 || initial_block == 0 {
        return Err(Error::InvalidParameter(
            "cascade needs passes >= 1 and initial_block >= 1".into(),
        ));
    }
    let ber = frame.bit_error_rate();
    if ber >= MAX_RECONCILE_BER {
        return Err(Error::BerTooHigh(ber));
    }
    let n = frame.len();
    if n == 0 {
        return Err(Error::InvalidParameter("cannot reconcile an empty frame".into()));
    }

    let mut alice = frame.alice_bits.clone();
    let bob = &frame.bob_bits;
    let mut transcript = Transcript::default();

    // All shuffles are drawn up front so the dialogue itself is the only
    // consumer of protocol state.
    let layouts: Vec<PassLayout> = (0..passes)
        .map(|p| {
            let perm = if p == 0 {
                (0..n).collect::<Vec<usize>>()
            } else {
                rng.permutation(n)
            };
            let mut inv = vec![0usize; n];
            for (slot, &pos) in perm.iter().enumerate() {
                inv[pos] = slot;
            }
            let block_size = (initial_block << p).min(n);
            let n_blocks = n.div_ceil(block_size);
            PassLayout {
                perm,
                inv,
                block_size,
                n_blocks,
            }
        })
        .collect();

    let parity_over = |bits: &Bits, layout: &PassLayout, slots: std::ops::Range<usize>| -> bool {
        let mut p = false;
        for slot in slots {
            p ^= bits[layout.perm[slot]];
        }
        p
    };

    // disclosed[p][j] = bob's parity once announced; alice_parity tracks
    // Alice's current parity for disclosed blocks and is kept incremental.
    let mut disclosed: Vec<Vec<Option<bool>>> =
        layouts.iter().map(|l| vec![None; l.n_blocks]).collect();
    let mut alice_parity: Vec<Vec<bool>> =
        layouts.iter().map(|l| vec![false; l.n_blocks]).collect();
    let mut mismatched: BTreeSet<(usize, usize)> = BTreeSet::new();

    let mut flip = |pos: usize,
                    alice: &mut Bits,
                    disclosed: &[Vec<Option<bool>>],
                    alice_parity: &mut [Vec<bool>],
                    mismatched: &mut BTreeSet<(usize, usize)>| {
        let v = alice[pos];
        alice.set(pos, !v);
        for (p, layout) in layouts.iter().enumerate() {
            let j = layout.block_of(pos);
            if let Some(b_parity) = disclosed[p][j] {
                alice_parity[p][j] = !alice_parity[p][j];
                if alice_parity[p][j] != b_parity {
                    mismatched.insert((p, j));
                } else {
                    mismatched.remove(&(p, j));
                }
            }
        }
    };

    for p in 0..passes {
        for j in 0..layouts[p].n_blocks {
            let slots = layouts[p].block_slots(j);
            let b_parity = parity_over(bob, &layouts[p], slots.clone());
            transcript.records.push(TranscriptRecord {
                frame_id: frame.frame_id,
                pass: (p + 1) as u32,
                block: j as u32,
                parity: b_parity,
            });
            let a_parity = parity_over(&alice, &layouts[p], slots);
            disclosed[p][j] = Some(b_parity);
            alice_parity[p][j] = a_parity;
            if a_parity != b_parity {
                mismatched.insert((p, j));
            }

            // Cascade: fix every known-mismatched block, smallest first.
            while let Some(&(q, i)) = mismatched.iter().next() {
                let block = layouts[q].block_slots(i);
                let (mut lo, mut hi) = (block.start, block.end);
                while hi - lo > 1 {
                    let mid = lo + (hi - lo).div_ceil(2);
                    let b_half = parity_over(bob, &layouts[q], lo..mid);
                    transcript.records.push(TranscriptRecord {
                        frame_id: frame.frame_id,
                        pass: (q + 1) as u32,
                        block: i as u32,
                        parity: b_half,
                    });
                    let a_half = parity_over(&alice, &layouts[q], lo..mid);
                    if a_half != b_half {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let pos = layouts[q].perm[lo];
                flip(
                    pos,
                    &mut alice,
                    &disclosed,
                    &mut alice_parity,
                    &mut mismatched,
                );
            }
        }
    }

    // Disclosed universal-hash verification, counted into leakage.
    let v_bits = VERIFICATION_HASH_BITS.min(n);
    let seed = ToeplitzSeed::random(n, v_bits, rng)?;
    let h_alice = toeplitz_hash(&alice, &seed)?;
    let h_bob = toeplitz_hash(bob, &seed)?;
    for (idx, bit) in h_bob.iter().enumerate() {
        transcript.records.push(TranscriptRecord {
            frame_id: frame.frame_id,
            pass: VERIFICATION_PASS,
            block: idx as u32,
            parity: *bit,
        });
    }
    if h_alice != h_bob {
        return Err(Error::ReconciliationFailed(frame.frame_id.to_string()));
    }

    let leakage_bits = frame.leakage_bits + transcript.leakage_bits();
    Ok((
        KeyFrame {
            frame_id: frame.frame_id,
            alice_bits: alice,
            bob_bits: frame.bob_bits,
            stage: KeyStage::Reconciled,
            leakage_bits,
        },
        transcript,
    ))
}

/// Seed of a binary Toeplitz matrix mapping `n_in` bits to `n_out` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    seed_bits: Bits,
    n_in: usize,
    n_out: usize,
}

impl ToeplitzSeed {
    pub fn new(seed_bits: Bits, n_in: usize, n_out: usize) -> Result<Self> {
        if n_out == 0 || n_out > n_in {
            return Err(Error::InvalidToeplitzSeed(format!(
                "need 1 <= n_out <= n_in, got n_out = {n_out}, n_in = {n_in}"
            )));
        }
        let expected = n_in + n_out - 1;
        if seed_bits.len() != expected {
            return Err(Error::InvalidToeplitzSeed(format!(
                "seed must hold exactly {expected} bits, got {}",
                seed_bits.len()
            )));
        }
        Ok(Self {
            seed_bits,
            n_in,
            n_out,
        })
    }

    /// Fresh public seed drawn from the given stream.
    pub fn random(n_in: usize, n_out: usize, rng: &mut StreamRng) -> Result<Self> {
        if n_out == 0 || n_out > n_in {
            return Err(Error::InvalidToeplitzSeed(format!(
                "need 1 <= n_out <= n_in, got n_out = {n_out}, n_in = {n_in}"
            )));
        }
        Ok(Self {
            seed_bits: crate::bits::random(n_in + n_out - 1, rng),
            n_in,
            n_out,
        })
    }

    pub fn seed_bits(&self) -> &Bits {
        &self.seed_bits
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Matrix entry `T[row][col] = seed_bit(col - row + n_out - 1)`.
    pub fn entry(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.n_out && col < self.n_in);
        self.seed_bits[col - row + self.n_out - 1]
    }
}

/// Binary Toeplitz matrix-vector product over GF(2):
/// `out[j] = XOR_i (in[i] AND seed_bit(i - j + n_out - 1))`, bit 0 first.
pub fn toeplitz_hash(input: &Bits, seed: &ToeplitzSeed) -> Result<Bits> {
    if input.len() != seed.n_in {
        return Err(Error::ToeplitzLengthMismatch {
            expected: seed.n_in,
            got: input.len(),
        });
    }
    let mut out = Bits::with_capacity(seed.n_out);
    for j in 0..seed.n_out {
        let window = &seed.seed_bits[seed.n_out - 1 - j..seed.n_out - 1 - j + seed.n_in];
        let mut acc = false;
        for i in input.iter_ones() {
            acc ^= window[i];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Why a frame produced no key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    NonPositiveSecretFraction,
    LeakageAndMarginConsumeKey,
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscardReason::NonPositiveSecretFraction => {
                write!(f, "secret fraction is not positive")
            }
            DiscardReason::LeakageAndMarginConsumeKey => {
                write!(f, "leakage adjustment and security margin consume the key")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum AmplifyOutcome {
    Key(KeyFrame),
    Discarded {
        frame_id: FrameId,
        reason: DiscardReason,
    },
}

/// Compress a reconciled frame into the final key by Toeplitz hashing.
///
/// Output length: `floor(n * secret_fraction)` minus a leakage adjustment
/// minus the security margin, floored at zero. The adjustment charges only
/// disclosure in excess of the plan's allowance `n - floor(n * s)`; the
/// planned secret fraction already pays for the eavesdropper bound and the
/// budgeted reconciliation cost.
pub fn amplify(
    frame: KeyFrame,
    secret_fraction: f64,
    security_margin_bits: usize,
    seed_rng: &mut StreamRng,
) -> Result<AmplifyOutcome> {
    if frame.stage != KeyStage::Reconciled {
        return Err(Error::WrongStage {
            expected: "reconciled",
            got: frame.stage.name(),
        });
    }
    let frame_id = frame.frame_id;
    if secret_fraction <= 0.0 {
        return Ok(AmplifyOutcome::Discarded {
            frame_id,
            reason: DiscardReason::NonPositiveSecretFraction,
        });
    }
    let n = frame.len();
    let planned = ((n as f64 * secret_fraction).floor() as usize).min(n);
    let budget = (n - planned) as u64;
    let adjustment = frame.leakage_bits.saturating_sub(budget) as usize;
    let n_out = planned.saturating_sub(adjustment + security_margin_bits);
    if n_out == 0 {
        return Ok(AmplifyOutcome::Discarded {
            frame_id,
            reason: DiscardReason::LeakageAndMarginConsumeKey,
        });
    }

    let seed = ToeplitzSeed::random(n, n_out, seed_rng)?;
    let key = toeplitz_hash(&frame.bob_bits, &seed)?;
    Ok(AmplifyOutcome::Key(KeyFrame {
        frame_id,
        alice_bits: key.clone(),
        bob_bits: key,
        stage: KeyStage::Amplified,
        leakage_bits: frame.leakage_bits,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits;

    fn frame_with_errors(n: usize, error_positions: &[usize], seed: u64) -> KeyFrame {
        let mut rng = StreamRng::new(seed);
        let bob = bits::random(n, &mut rng);
        let mut alice = bob.clone();
        for &pos in error_positions {
            let v = alice[pos];
            alice.set(pos, !v);
        }
        KeyFrame::raw(FrameId { station: 0, step: 0 }, alice, bob)
    }

    /// Parity disclosures of the pass structure alone, plus verification.
    fn baseline_leakage(n: usize, passes: usize, k1: usize) -> u64 {
        let blocks: usize = (0..passes).map(|p| n.div_ceil((k1 << p).min(n))).sum();
        (blocks + VERIFICATION_HASH_BITS.min(n)) as u64
    }

    #[test]
    fn extract_raw_sign_convention() {
        use crate::phase_space::{QuadratureBatch, SourceTag};
        let tx = bits::from_str01("0110");
        let rx = QuadratureBatch {
            samples: vec![1.4, -0.2, 0.3, -2.0],
            lo_phase: 0.0,
            source: SourceTag::Signal,
        };
        let frame =
            extract_raw(&tx, &rx, &[0, 1, 2, 3], &[], FrameId { station: 1, step: 2 }).unwrap();
        assert_eq!(bits::to_str01(&frame.alice_bits), "0110");
        // Negative samples decode as 1.
        assert_eq!(bits::to_str01(&frame.bob_bits), "0101");
        assert_eq!(frame.stage, KeyStage::Raw);
        assert_eq!(frame.leakage_bits, 0);
    }

    #[test]
    fn extract_raw_rejects_overlap_and_range() {
        use crate::phase_space::{QuadratureBatch, SourceTag};
        let tx = bits::from_str01("0101");
        let rx = QuadratureBatch {
            samples: vec![0.0; 4],
            lo_phase: 0.0,
            source: SourceTag::Signal,
        };
        assert!(matches!(
            extract_raw(&tx, &rx, &[1, 2], &[2], FrameId { station: 0, step: 0 }),
            Err(Error::IndexOverlap(2))
        ));
        assert!(matches!(
            extract_raw(&tx, &rx, &[9], &[], FrameId { station: 0, step: 0 }),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn cascade_zero_error_frame_costs_only_structure() {
        let frame = frame_with_errors(1024, &[], 1);
        let bob = frame.bob_bits.clone();
        let mut rng = StreamRng::new(2);
        let (out, transcript) = cascade_reconcile(frame, 4, 16, &mut rng).unwrap();
        assert_eq!(out.stage, KeyStage::Reconciled);
        assert_eq!(out.alice_bits, out.bob_bits);
        assert_eq!(out.bob_bits, bob);
        assert_eq!(out.leakage_bits, baseline_leakage(1024, 4, 16));
        assert_eq!(transcript.leakage_bits(), out.leakage_bits);
    }

    #[test]
    fn cascade_single_error_leakage_pinned() {
        // One flipped bit in 1024 with 16-bit first-pass blocks: the pass
        // structure discloses 64+32+16+8 parities, the binary search
        // log2(16) = 4 more, verification 64. Total 188.
        let frame = frame_with_errors(1024, &[777], 3);
        let mut rng = StreamRng::new(4);
        let (out, transcript) = cascade_reconcile(frame, 4, 16, &mut rng).unwrap();
        assert_eq!(out.alice_bits, out.bob_bits);
        assert_eq!(transcript.leakage_bits(), 188);
        assert_eq!(out.leakage_bits, 188);
        assert_eq!(baseline_leakage(1024, 4, 16) + 4, 188);
    }

    #[test]
    fn cascade_corrects_percent_level_noise() {
        // 2% BER over 2048 bits.
        let mut pos_rng = StreamRng::new(5);
        let errors: Vec<usize> = (0..2048).filter(|_| pos_rng.uniform() < 0.02).collect();
        assert!(!errors.is_empty());
        let frame = frame_with_errors(2048, &errors, 6);
        let mut rng = StreamRng::new(7);
        let (out, transcript) = cascade_reconcile(frame, 4, 16, &mut rng).unwrap();
        assert_eq!(out.alice_bits, out.bob_bits);
        assert_eq!(out.leakage_bits, transcript.leakage_bits());
        assert!(out.leakage_bits < 2048, "leakage {}", out.leakage_bits);
    }

    #[test]
    fn cascade_deterministic_given_seed() {
        let run = || {
            let frame = frame_with_errors(512, &[3, 77, 301], 8);
            let mut rng = StreamRng::new(9);
            cascade_reconcile(frame, 3, 8, &mut rng).unwrap()
        };
        let (a, ta) = run();
        let (b, tb) = run();
        assert_eq!(a.alice_bits, b.alice_bits);
        assert_eq!(ta, tb);
    }

    #[test]
    fn cascade_flags_undetected_errors() {
        // Two errors in the same block with a single pass spanning the whole
        // frame: the block parity is even, so nothing is corrected and the
        // verification hash must flag the failure.
        let frame = frame_with_errors(64, &[10, 20], 10);
        let mut rng = StreamRng::new(11);
        let err = cascade_reconcile(frame, 1, 64, &mut rng);
        assert!(matches!(err, Err(Error::ReconciliationFailed(_))));
    }

    #[test]
    fn cascade_rejects_wrong_stage_and_high_ber() {
        let frame = frame_with_errors(128, &[], 12);
        let mut rng = StreamRng::new(13);
        let (reconciled, _) = cascade_reconcile(frame, 2, 8, &mut rng).unwrap();
        assert!(matches!(
            cascade_reconcile(reconciled, 2, 8, &mut rng),
            Err(Error::WrongStage { .. })
        ));

        let noisy = frame_with_errors(100, &(0..30).collect::<Vec<_>>(), 14);
        assert!(matches!(
            cascade_reconcile(noisy, 2, 8, &mut rng),
            Err(Error::BerTooHigh(_))
        ));
    }

    #[test]
    fn transcript_lines_format() {
        let frame = frame_with_errors(8, &[], 20);
        let mut rng = StreamRng::new(21);
        let (_, transcript) = cascade_reconcile(frame, 1, 4, &mut rng).unwrap();
        let lines = transcript.to_lines();
        let first = lines.lines().next().unwrap();
        // frame_id,pass,block,parity
        assert!(first.starts_with("s0.t0,1,0,"));
        assert_eq!(lines.lines().count() as u64, transcript.leakage_bits());
    }

    #[test]
    fn toeplitz_spec_vector() {
        // 4 -> 2 with seed 10110 (bit 0 first) on input 1010; the expected
        // output 10 is pinned from the brute-force matrix-multiply oracle in
        // tests/support.
        let seed = ToeplitzSeed::new(bits::from_str01("10110"), 4, 2).unwrap();
        let out = toeplitz_hash(&bits::from_str01("1010"), &seed).unwrap();
        assert_eq!(bits::to_str01(&out), "10");
    }

    #[test]
    fn toeplitz_zero_input_maps_to_zero() {
        let mut rng = StreamRng::new(22);
        let seed = ToeplitzSeed::random(64, 16, &mut rng).unwrap();
        let out = toeplitz_hash(&Bits::repeat(false, 64), &seed).unwrap();
        assert!(out.not_any());
        assert_eq!(out.len(), 16);
    }

    #[test]
    fn toeplitz_linearity() {
        let mut rng = StreamRng::new(23);
        for _ in 0..200 {
            let seed = ToeplitzSeed::random(48, 12, &mut rng).unwrap();
            let a = bits::random(48, &mut rng);
            let b = bits::random(48, &mut rng);
            let ha = toeplitz_hash(&a, &seed).unwrap();
            let hb = toeplitz_hash(&b, &seed).unwrap();
            let hxor = toeplitz_hash(&bits::xor(&a, &b), &seed).unwrap();
            assert_eq!(hxor, bits::xor(&ha, &hb));
        }
    }

    #[test]
    fn toeplitz_seed_validation() {
        assert!(ToeplitzSeed::new(bits::from_str01("101"), 4, 2).is_err());
        assert!(ToeplitzSeed::new(bits::from_str01("10110"), 2, 4).is_err());
        let seed = ToeplitzSeed::new(bits::from_str01("10110"), 4, 2).unwrap();
        assert!(matches!(
            toeplitz_hash(&bits::from_str01("10"), &seed),
            Err(Error::ToeplitzLengthMismatch { .. })
        ));
    }

    fn reconciled_frame(n: usize, leakage: u64) -> KeyFrame {
        let mut rng = StreamRng::new(30);
        let key = bits::random(n, &mut rng);
        KeyFrame {
            frame_id: FrameId { station: 2, step: 9 },
            alice_bits: key.clone(),
            bob_bits: key,
            stage: KeyStage::Reconciled,
            leakage_bits: leakage,
        }
    }

    #[test]
    fn amplify_nonpositive_fraction_discards() {
        let mut rng = StreamRng::new(31);
        let out = amplify(reconciled_frame(128, 0), 0.0, 0, &mut rng).unwrap();
        assert!(matches!(
            out,
            AmplifyOutcome::Discarded {
                reason: DiscardReason::NonPositiveSecretFraction,
                ..
            }
        ));
    }

    #[test]
    fn amplify_identity_bound() {
        let mut rng = StreamRng::new(32);
        let out = amplify(reconciled_frame(128, 0), 1.0, 0, &mut rng).unwrap();
        match out {
            AmplifyOutcome::Key(k) => {
                assert_eq!(k.len(), 128);
                assert_eq!(k.stage, KeyStage::Amplified);
                assert_eq!(k.alice_bits, k.bob_bits);
            }
            other => panic!("expected a key, got {other:?}"),
        }
    }

    #[test]
    fn amplify_length_arithmetic() {
        // n = 4096, fraction 0.2, leakage 800, margin 64:
        // planned = 819, allowance = 4096 - 819 = 3277 >= 800 so no
        // adjustment, n_out = 819 - 64 = 755.
        let mut rng = StreamRng::new(33);
        let out = amplify(reconciled_frame(4096, 800), 0.2, 64, &mut rng).unwrap();
        match out {
            AmplifyOutcome::Key(k) => assert_eq!(k.len(), 755),
            other => panic!("expected a key, got {other:?}"),
        }

        // Excess leakage is charged one-for-one: leakage 3400 overshoots the
        // 3277-bit allowance by 123, n_out = 819 - 123 - 64 = 632.
        let mut rng = StreamRng::new(34);
        let out = amplify(reconciled_frame(4096, 3400), 0.2, 64, &mut rng).unwrap();
        match out {
            AmplifyOutcome::Key(k) => assert_eq!(k.len(), 632),
            other => panic!("expected a key, got {other:?}"),
        }
    }

    #[test]
    fn amplify_rejects_raw_frames() {
        let frame = frame_with_errors(64, &[], 35);
        let mut rng = StreamRng::new(36);
        assert!(matches!(
            amplify(frame, 0.5, 0, &mut rng),
            Err(Error::WrongStage { .. })
        ));
    }

    #[test]
    fn amplified_keys_look_uniform() {
        // Bit frequency and lag-1 correlation across many frames.
        let mut all = Bits::new();
        for seed in 0..50u64 {
            let mut rng = StreamRng::new(40 + seed);
            let key = bits::random(512, &mut rng);
            let frame = KeyFrame {
                frame_id: FrameId { station: 0, step: seed },
                alice_bits: key.clone(),
                bob_bits: key,
                stage: KeyStage::Reconciled,
                leakage_bits: 100,
            };
            if let AmplifyOutcome::Key(k) = amplify(frame, 0.5, 16, &mut rng).unwrap() {
                all.extend_from_bitslice(&k.alice_bits);
            }
        }
        let n = all.len() as f64;
        assert!(n > 5_000.0);
        let bias = bits::ones_fraction(&all);
        assert!((bias - 0.5).abs() < 5.0 * 0.5 / n.sqrt(), "bias {bias}");
        let r = crate::qrng::lag1_correlation(&all);
        assert!(r.abs() < 5.0 / n.sqrt(), "lag-1 {r}");
    }
}
