//! Gaussian phase-space model of coherent states, the BPSK alphabet, and
//! homodyne measurement sampling.
//!
//! A coherent state is fully described by its complex amplitude and the
//! shared quadrature convention: measuring quadrature angle `theta` on a
//! state with amplitude `(amp_i, amp_q)` yields a Gaussian with mean
//! `mean_scale * (amp_i cos(theta) + amp_q sin(theta))` and variance
//! `shot_noise_variance`. No Fock-space machinery is used at runtime; the
//! number-basis route exists only as a test oracle.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Quadrature normalization shared by every module in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConvention {
    /// Homodyne variance of the vacuum state, in shot-noise units.
    pub shot_noise_variance: f64,
    /// Factor mapping a coherent amplitude to its homodyne mean.
    pub mean_scale: f64,
}

/// The one convention used everywhere: vacuum variance 1, and a coherent
/// state with real amplitude `a` has homodyne mean `2a`.
pub const CONVENTION: QuadConvention = QuadConvention {
    shot_noise_variance: 1.0,
    mean_scale: 2.0,
};

impl QuadConvention {
    /// Exponent scale of the overlap law
    /// `|<b|a>|^2 = exp(-kappa * |alpha_a - alpha_b|^2)`.
    ///
    /// Fixed by the convention so that `|<-a|a>|^2 = exp(-4 a^2)`.
    pub fn overlap_kappa(&self) -> f64 {
        self.mean_scale * self.mean_scale / (4.0 * self.shot_noise_variance)
    }
}

/// A coherent state `|alpha>`, stored as in-phase and in-quadrature
/// amplitude components (the I/Q, or X/P, axes of phase space).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentState {
    pub amp_i: f64,
    pub amp_q: f64,
}

impl CoherentState {
    pub const VACUUM: CoherentState = CoherentState {
        amp_i: 0.0,
        amp_q: 0.0,
    };

    pub fn new(amp_i: f64, amp_q: f64) -> Result<Self> {
        if !(amp_i.is_finite() && amp_q.is_finite()) {
            return Err(Error::NonFiniteAmplitude { amp_i, amp_q });
        }
        Ok(Self { amp_i, amp_q })
    }

    /// `|alpha|^2`, the mean photon number.
    pub fn mean_photon_number(&self) -> f64 {
        self.amp_i * self.amp_i + self.amp_q * self.amp_q
    }

    /// Homodyne mean when measuring quadrature angle `lo_phase`.
    pub fn quadrature_mean(&self, lo_phase: f64) -> f64 {
        CONVENTION.mean_scale * (self.amp_i * lo_phase.cos() + self.amp_q * lo_phase.sin())
    }

    /// Amplitude scaled by a real factor (loss acts as `sqrt(T)`).
    pub fn scaled(&self, factor: f64) -> CoherentState {
        CoherentState {
            amp_i: self.amp_i * factor,
            amp_q: self.amp_q * factor,
        }
    }
}

impl std::ops::Neg for CoherentState {
    type Output = CoherentState;

    fn neg(self) -> CoherentState {
        CoherentState {
            amp_i: -self.amp_i,
            amp_q: -self.amp_q,
        }
    }
}

/// The two-symbol modulation alphabet: coherent states of equal amplitude
/// and a phase difference of pi, at `+-alpha` along the signal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpskAlphabet {
    alpha: f64,
    phase_offset: f64,
}

impl BpskAlphabet {
    /// `alpha >= 0` (zero is the degenerate "no modulation" alphabet used by
    /// calibration runs), `phase_offset` in radians orients the signal axis.
    pub fn new(alpha: f64, phase_offset: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidAlphabet(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        if !phase_offset.is_finite() {
            return Err(Error::InvalidAlphabet(format!(
                "phase_offset must be finite, got {phase_offset}"
            )));
        }
        Ok(Self {
            alpha,
            phase_offset,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    /// The coherent state encoding one bit: `false -> +alpha`,
    /// `true -> -alpha` along the signal axis. Exact componentwise negation.
    pub fn symbol(&self, bit: bool) -> CoherentState {
        let base = CoherentState {
            amp_i: self.alpha * self.phase_offset.cos(),
            amp_q: self.alpha * self.phase_offset.sin(),
        };
        if bit {
            -base
        } else {
            base
        }
    }
}

/// Where a quadrature record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Vacuum,
    Signal,
}

/// A batch of homodyne outcomes measured at a common quadrature angle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureBatch {
    pub samples: Vec<f64>,
    pub lo_phase: f64,
    pub source: SourceTag,
}

impl QuadratureBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `|<b|a>|^2`, the squared overlap of two coherent states.
///
/// In the crate convention this is `exp(-|alpha_a - alpha_b|^2)`, so the two
/// BPSK symbols overlap by `exp(-4 alpha^2)`: essentially orthogonal at data
/// communication amplitudes, strongly overlapping in the quantum regime.
pub fn overlap(a: CoherentState, b: CoherentState) -> f64 {
    let di = a.amp_i - b.amp_i;
    let dq = a.amp_q - b.amp_q;
    (-CONVENTION.overlap_kappa() * (di * di + dq * dq)).exp()
}

/// One homodyne outcome with an explicit Gaussian variance.
///
/// Shared by ideal sampling (vacuum variance) and channel-output sampling
/// (shot noise plus excess noise); also the non-allocating path used by the
/// vacuum QRNG.
pub fn homodyne_draw_with_variance(
    state: CoherentState,
    lo_phase: f64,
    variance: f64,
    rng: &mut StreamRng,
) -> f64 {
    state.quadrature_mean(lo_phase) + variance.sqrt() * rng.standard_normal()
}

/// `n` independent homodyne outcomes at the given variance.
pub fn homodyne_sample_with_variance(
    state: CoherentState,
    lo_phase: f64,
    variance: f64,
    n: usize,
    rng: &mut StreamRng,
) -> Result<QuadratureBatch> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if !(variance > 0.0) {
        return Err(Error::NonPositiveVariance(variance));
    }
    let mean = state.quadrature_mean(lo_phase);
    let sigma = variance.sqrt();
    let samples = (0..n).map(|_| mean + sigma * rng.standard_normal()).collect();
    let source = if state == CoherentState::VACUUM {
        SourceTag::Vacuum
    } else {
        SourceTag::Signal
    };
    Ok(QuadratureBatch {
        samples,
        lo_phase,
        source,
    })
}

/// `n` independent homodyne outcomes of an ideal measurement: Gaussian with
/// mean `mean_scale * projection` and variance `shot_noise_variance`.
pub fn homodyne_sample(
    state: CoherentState,
    lo_phase: f64,
    n: usize,
    rng: &mut StreamRng,
) -> Result<QuadratureBatch> {
    homodyne_sample_with_variance(state, lo_phase, CONVENTION.shot_noise_variance, n, rng)
}

/// Probability that a sign-threshold homodyne decision misidentifies a BPSK
/// symbol: `Phi(-mean_scale * alpha / sqrt(shot_noise_variance + extra))`.
pub fn discrimination_error(alphabet: &BpskAlphabet, extra_variance: f64) -> Result<f64> {
    if !(extra_variance >= 0.0) {
        return Err(Error::NegativeVariance(extra_variance));
    }
    let sigma = (CONVENTION.shot_noise_variance + extra_variance).sqrt();
    let std_normal = Normal::standard();
    Ok(std_normal.cdf(-CONVENTION.mean_scale * alphabet.alpha() / sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn convention_is_the_documented_one() {
        assert_eq!(CONVENTION.shot_noise_variance, 1.0);
        assert_eq!(CONVENTION.mean_scale, 2.0);
        assert_eq!(CONVENTION.overlap_kappa(), 1.0);
    }

    #[test]
    fn symbol_along_i_axis() {
        let a = BpskAlphabet::new(0.5, 0.0).unwrap();
        let s0 = a.symbol(false);
        let s1 = a.symbol(true);
        assert_eq!((s0.amp_i, s0.amp_q), (0.5, 0.0));
        assert_eq!((s1.amp_i, s1.amp_q), (-0.5, 0.0));
        assert_eq!(s0, -s1);
    }

    #[test]
    fn symbol_rotated_matches_rotation_matrix() {
        // Oracle: rotate (alpha, 0) by phase_offset with an explicit 2x2
        // rotation matrix.
        let (alpha, phi) = (1.0, std::f64::consts::FRAC_PI_2);
        let a = BpskAlphabet::new(alpha, phi).unwrap();
        let s = a.symbol(false);
        let (c, sn) = (phi.cos(), phi.sin());
        let expect = (c * alpha - sn * 0.0, sn * alpha + c * 0.0);
        assert!((s.amp_i - expect.0).abs() < 1e-12);
        assert!((s.amp_q - expect.1).abs() < 1e-12);
        assert!(s.amp_i.abs() < 1e-12);
        assert!((s.amp_q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_of_identical_states_is_one() {
        let s = CoherentState::new(0.3, -1.7).unwrap();
        assert_eq!(overlap(s, s), 1.0);
    }

    #[test]
    fn overlap_of_bpsk_pair_matches_closed_form() {
        // exp(-4 |alpha|^2) for |alpha> vs |-alpha>; value frozen from the
        // Fock-basis oracle in tests/acceptance.rs.
        let a = CoherentState::new(0.5, 0.0).unwrap();
        let o = overlap(a, -a);
        assert!((o - (-1.0f64).exp()).abs() < 1e-15, "got {o}");

        let big = CoherentState::new(3.0, 0.0).unwrap();
        let tiny = overlap(big, -big);
        assert!((tiny - (-36.0f64).exp()).abs() < 1e-24, "got {tiny}");
        assert!(tiny < 1e-15, "data-communication regime should be orthogonal");
    }

    #[test]
    fn overlap_symmetric_and_bounded() {
        let mut rng = StreamRng::new(2);
        for _ in 0..200 {
            let a = CoherentState::new(3.0 * rng.standard_normal(), 3.0 * rng.standard_normal())
                .unwrap();
            let b = CoherentState::new(3.0 * rng.standard_normal(), 3.0 * rng.standard_normal())
                .unwrap();
            let oab = overlap(a, b);
            let oba = overlap(b, a);
            assert_eq!(oab, oba);
            assert!((0.0..=1.0).contains(&oab));
        }
    }

    #[test]
    fn overlap_strictly_decreasing_in_distance() {
        let a = CoherentState::VACUUM;
        let mut last = overlap(a, a);
        for k in 1..40 {
            let b = CoherentState::new(0.1 * k as f64, 0.0).unwrap();
            let o = overlap(a, b);
            assert!(o < last, "overlap must fall as states separate");
            last = o;
        }
    }

    #[test]
    fn vacuum_moments_match_convention() {
        let mut rng = StreamRng::new(13);
        let n = 100_000;
        let batch = homodyne_sample(CoherentState::VACUUM, 0.4, n, &mut rng).unwrap();
        assert_eq!(batch.source, SourceTag::Vacuum);
        let (mean, var) = mean_and_variance(&batch.samples);
        let se_mean = (CONVENTION.shot_noise_variance / n as f64).sqrt();
        let se_var = CONVENTION.shot_noise_variance * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(mean.abs() < 5.0 * se_mean, "vacuum mean {mean}");
        assert!(
            (var - CONVENTION.shot_noise_variance).abs() < 5.0 * se_var,
            "vacuum variance {var}"
        );
    }

    #[test]
    fn signal_mean_matches_projection() {
        let mut rng = StreamRng::new(14);
        let n = 100_000;
        let s = CoherentState::new(0.5, 0.0).unwrap();
        let batch = homodyne_sample(s, 0.0, n, &mut rng).unwrap();
        assert_eq!(batch.source, SourceTag::Signal);
        let (mean, _) = mean_and_variance(&batch.samples);
        let se = (1.0 / n as f64).sqrt();
        assert!((mean - CONVENTION.mean_scale * 0.5).abs() < 5.0 * se, "mean {mean}");

        // Orthogonal quadrature carries no BPSK signal.
        let mut rng2 = StreamRng::new(15);
        let batch_orth =
            homodyne_sample(s, std::f64::consts::FRAC_PI_2, n, &mut rng2).unwrap();
        let (mean_orth, _) = mean_and_variance(&batch_orth.samples);
        assert!(mean_orth.abs() < 5.0 * se, "orthogonal mean {mean_orth}");
    }

    #[test]
    fn empty_batch_rejected() {
        let mut rng = StreamRng::new(1);
        let err = homodyne_sample(CoherentState::VACUUM, 0.0, 0, &mut rng);
        assert!(matches!(err, Err(Error::EmptyBatch)));
    }

    #[test]
    fn batches_deterministic_by_seed() {
        let s = CoherentState::new(0.2, 0.9).unwrap();
        let mut a = StreamRng::new(99);
        let mut b = StreamRng::new(99);
        let ba = homodyne_sample(s, 1.1, 4096, &mut a).unwrap();
        let bb = homodyne_sample(s, 1.1, 4096, &mut b).unwrap();
        assert_eq!(ba.samples, bb.samples);
    }

    #[test]
    fn phase_covariance_of_outcome_distribution() {
        // Rotating both the state and the LO by the same angle leaves the
        // distribution unchanged; with paired seeds the samples agree up to
        // floating-point evaluation order, so the empirical CDFs coincide.
        let n = 20_000;
        let rot = 0.9f64;
        let s = CoherentState::new(0.7, -0.2).unwrap();
        let (c, sn) = (rot.cos(), rot.sin());
        let s_rot = CoherentState::new(c * s.amp_i - sn * s.amp_q, sn * s.amp_i + c * s.amp_q)
            .unwrap();

        let mut ra = StreamRng::new(31);
        let mut rb = StreamRng::new(31);
        let mut xs = homodyne_sample(s, 0.3, n, &mut ra).unwrap().samples;
        let mut ys = homodyne_sample(s_rot, 0.3 + rot, n, &mut rb).unwrap().samples;
        xs.sort_by(|a, b| a.total_cmp(b));
        ys.sort_by(|a, b| a.total_cmp(b));
        // Kolmogorov-Smirnov distance between paired sorted samples.
        let ks = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(ks < 1e-9, "rotated distribution deviates, sup|dx| = {ks}");
    }

    #[test]
    fn discrimination_error_limits() {
        let zero = BpskAlphabet::new(0.0, 0.0).unwrap();
        assert_eq!(discrimination_error(&zero, 0.0).unwrap(), 0.5);

        let huge = BpskAlphabet::new(20.0, 0.0).unwrap();
        assert!(discrimination_error(&huge, 0.0).unwrap() < 1e-12);

        let a = BpskAlphabet::new(0.5, 0.0).unwrap();
        assert!(matches!(
            discrimination_error(&a, -0.1),
            Err(Error::NegativeVariance(_))
        ));
    }

    #[test]
    fn discrimination_error_monotonicity() {
        let mut last = 0.5;
        for k in 1..30 {
            let a = BpskAlphabet::new(0.1 * k as f64, 0.0).unwrap();
            let p = discrimination_error(&a, 0.0).unwrap();
            assert!(p < last, "error must fall with alpha");
            last = p;
        }
        let a = BpskAlphabet::new(0.5, 0.0).unwrap();
        let mut last = discrimination_error(&a, 0.0).unwrap();
        for k in 1..20 {
            let p = discrimination_error(&a, 0.3 * k as f64).unwrap();
            assert!(p > last, "error must rise with extra variance");
            last = p;
        }
    }

    #[test]
    fn discrimination_error_matches_monte_carlo() {
        // Monte-Carlo oracle: a million sign decisions on symbol 0.
        let alpha = 0.5;
        let a = BpskAlphabet::new(alpha, 0.0).unwrap();
        let p = discrimination_error(&a, 0.0).unwrap();
        let mut rng = StreamRng::new(8);
        let n = 1_000_000usize;
        let s = a.symbol(false);
        let mut wrong = 0usize;
        for _ in 0..n {
            let y = homodyne_draw_with_variance(s, 0.0, CONVENTION.shot_noise_variance, &mut rng);
            if y < 0.0 {
                wrong += 1;
            }
        }
        let p_hat = wrong as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (p_hat - p).abs() < 3.0 * sigma,
            "empirical {p_hat} vs closed form {p}"
        );
    }

    #[test]
    fn non_finite_amplitudes_rejected() {
        assert!(CoherentState::new(f64::NAN, 0.0).is_err());
        assert!(CoherentState::new(0.0, f64::INFINITY).is_err());
        assert!(BpskAlphabet::new(-0.1, 0.0).is_err());
        assert!(BpskAlphabet::new(1.0, f64::NAN).is_err());
    }
}
