//! One QKD session between the satellite transmitter and a ground receiver:
//! modulation, transmission, homodyne detection, channel parameter
//! estimation, and the asymptotic key-rate report.
//!
//! Security model (declared plumbing, not a contribution of this crate): an
//! asymptotic rate against a beam-splitter collective eavesdropper,
//! `secret_fraction = beta * I_AB - chi`, with reverse-reconciliation
//! inefficiency folded into `beta`. The Holevo term uses the two pure states
//! available to an eavesdropper holding the lost fraction of the beam. The
//! module boundary lets a stricter bound replace [`holevo_bpsk`] without
//! touching callers.

use crate::bits::Bits;
use crate::channel::{apply_channel, ChannelModel, FadingModel};
use crate::error::{Error, Result};
use crate::phase_space::{
    homodyne_draw_with_variance, BpskAlphabet, QuadratureBatch, SourceTag, CONVENTION,
};
use crate::qrng::BitBuffer;
use crate::rng::StreamRng;

/// Estimation subsets smaller than this are rejected.
pub const MIN_ESTIMATION_SYMBOLS: usize = 100;

/// Everything one session needs to run.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub alphabet: BpskAlphabet,
    pub n_symbols: usize,
    /// Fraction of symbols disclosed for channel estimation.
    pub estimation_fraction: f64,
    pub channel: ChannelModel,
    pub fading: FadingModel,
    /// True receiver-referred excess noise injected by the simulation.
    pub excess_noise_true: f64,
    /// Reconciliation efficiency beta.
    pub reconciliation_efficiency: f64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 {
            return Err(Error::InvalidParameter("n_symbols must be >= 1".into()));
        }
        if !(self.estimation_fraction > 0.0 && self.estimation_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "estimation_fraction must lie in (0, 1), got {}",
                self.estimation_fraction
            )));
        }
        if !(self.excess_noise_true >= 0.0) {
            return Err(Error::NegativeVariance(self.excess_noise_true));
        }
        if !(self.reconciliation_efficiency > 0.0 && self.reconciliation_efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "reconciliation_efficiency must lie in (0, 1], got {}",
                self.reconciliation_efficiency
            )));
        }
        let t = self.channel.transmittance();
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidTransmittance(t));
        }
        Ok(())
    }
}

/// Index-aligned record of the quantum phase of a session.
#[derive(Debug, Clone)]
pub struct QuantumPhaseRecord {
    /// The bits actually modulated (first `n_symbols` of the supply).
    pub tx_record: Bits,
    /// Bob's homodyne outcomes, one per symbol.
    pub rx_batch: QuadratureBatch,
    /// Fading factor drawn for each symbol.
    pub fading_log: Vec<f64>,
}

/// Run modulation, channel, and detection for one session.
///
/// Per symbol: draw a fading factor, attenuate the symbol through the
/// channel, and homodyne-sample at the local-oscillator phase aligned with
/// the signal axis. Records are index-aligned.
pub fn run_quantum_phase(
    cfg: &SessionConfig,
    tx_bits: &BitBuffer,
    rng: &mut StreamRng,
) -> Result<QuantumPhaseRecord> {
    cfg.validate()?;
    if tx_bits.len() < cfg.n_symbols {
        return Err(Error::InsufficientBits {
            needed: cfg.n_symbols,
            got: tx_bits.len(),
        });
    }

    let t_channel = cfg.channel.transmittance();
    let lo_phase = cfg.alphabet.phase_offset();
    let mut fading_rng = rng.substream_named("fading");
    let mut noise_rng = rng.substream_named("noise");

    let mut samples = Vec::with_capacity(cfg.n_symbols);
    let mut fading_log = Vec::with_capacity(cfg.n_symbols);
    for i in 0..cfg.n_symbols {
        let state = cfg.alphabet.symbol(tx_bits.bits[i]);
        let fade = cfg.fading.draw(&mut fading_rng);
        let (state, variance) = apply_channel(state, t_channel * fade, cfg.excess_noise_true)?;
        samples.push(homodyne_draw_with_variance(
            state,
            lo_phase,
            variance,
            &mut noise_rng,
        ));
        fading_log.push(fade);
    }

    Ok(QuantumPhaseRecord {
        tx_record: tx_bits.bits[..cfg.n_symbols].to_bitvec(),
        rx_batch: QuadratureBatch {
            samples,
            lo_phase,
            source: SourceTag::Signal,
        },
        fading_log,
    })
}

/// Disjoint estimation/key index sets, both sorted ascending.
#[derive(Debug, Clone)]
pub struct Partition {
    pub estimation: Vec<usize>,
    pub key: Vec<usize>,
}

/// Split `0..n` into a disclosed estimation subset and a key subset by a
/// public seeded permutation. At least one symbol lands on each side.
pub fn partition_indices(n: usize, estimation_fraction: f64, rng: &mut StreamRng) -> Partition {
    assert!(n >= 2, "cannot partition fewer than two symbols");
    let n_est = ((n as f64 * estimation_fraction).round() as usize).clamp(1, n - 1);
    let perm = rng.permutation(n);
    let mut estimation: Vec<usize> = perm[..n_est].to_vec();
    let mut key: Vec<usize> = perm[n_est..].to_vec();
    estimation.sort_unstable();
    key.sort_unstable();
    Partition { estimation, key }
}

/// Receiver-side estimate of the channel from the disclosed subset.
#[derive(Debug, Clone, Copy)]
pub struct ChannelEstimate {
    pub t_hat: f64,
    pub excess_hat: f64,
    pub n_used: usize,
    /// 95% Gaussian half-widths for (t_hat, excess_hat).
    pub t_halfwidth: f64,
    pub excess_halfwidth: f64,
}

/// Estimate transmittance and excess noise from the disclosed symbols.
///
/// Folds the BPSK sign out of each disclosed outcome, then reads the
/// conditional mean (giving `t_hat = (mean / (mean_scale * alpha))^2`) and
/// the conditional variance (giving `excess_hat = var - shot_noise`, floored
/// at zero). Under fading this reports the effective average transmittance
/// with the fading spread inflating the variance.
pub fn estimate_channel(
    tx_record: &Bits,
    rx_batch: &QuadratureBatch,
    estimation_indices: &[usize],
    cfg: &SessionConfig,
) -> Result<ChannelEstimate> {
    let n = estimation_indices.len();
    if n < MIN_ESTIMATION_SYMBOLS {
        return Err(Error::EstimationSubsetTooSmall {
            needed: MIN_ESTIMATION_SYMBOLS,
            got: n,
        });
    }
    let alpha = cfg.alphabet.alpha();
    if alpha == 0.0 {
        return Err(Error::ZeroAlphaEstimation);
    }

    let len = tx_record.len().min(rx_batch.samples.len());
    let mut folded = Vec::with_capacity(n);
    let mut saw_zero = false;
    let mut saw_one = false;
    for &i in estimation_indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        let bit = tx_record[i];
        if bit {
            saw_one = true;
        } else {
            saw_zero = true;
        }
        let y = rx_batch.samples[i];
        folded.push(if bit { -y } else { y });
    }
    if !(saw_zero && saw_one) {
        return Err(Error::DegenerateEstimationSet);
    }

    let nf = n as f64;
    let mean = folded.iter().sum::<f64>() / nf;
    let var = folded.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / (nf - 1.0);
    let scale = CONVENTION.mean_scale * alpha;
    let t_hat = ((mean / scale) * (mean / scale)).clamp(f64::MIN_POSITIVE, 1.0);
    let excess_hat = (var - CONVENTION.shot_noise_variance).max(0.0);

    let se_mean = (var / nf).sqrt();
    let t_halfwidth = 1.96 * (2.0 * mean.abs() / (scale * scale)) * se_mean;
    let excess_halfwidth = 1.96 * var * (2.0 / (nf - 1.0)).sqrt();

    Ok(ChannelEstimate {
        t_hat,
        excess_hat,
        n_used: n,
        t_halfwidth,
        excess_halfwidth,
    })
}

/// Binary entropy in bits; `h2(0) = h2(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Mutual information of equiprobable binary input `+-(mean_scale *
/// alpha_eff)` over an additive Gaussian channel of the given variance,
/// in bits. Deterministic numerical integration.
///
/// Computed as `h(Y) - h(Y|X)` in standardized coordinates with composite
/// Simpson quadrature; the result depends only on the mean-to-sigma ratio.
pub fn mutual_information(alpha_eff: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::NonPositiveVariance(variance));
    }
    if !alpha_eff.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha_eff must be finite, got {alpha_eff}"
        )));
    }
    let m = CONVENTION.mean_scale * alpha_eff.abs() / variance.sqrt();
    if m == 0.0 {
        return Ok(0.0);
    }

    // h(Z) for the standardized mixture p(z) = (phi(z-m) + phi(z+m)) / 2.
    let half = m + 12.0;
    let n_intervals = (((2.0 * half) * 400.0).ceil() as usize).clamp(8_192, 1 << 20) & !1usize;
    let h = 2.0 * half / n_intervals as f64;
    let ln2 = std::f64::consts::LN_2;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let integrand = |z: f64| -> f64 {
        let pm = (-0.5 * (z - m) * (z - m)).exp();
        let pp = (-0.5 * (z + m) * (z + m)).exp();
        let p = 0.5 * norm * (pm + pp);
        if p <= 1e-300 {
            0.0
        } else {
            -p * p.ln() / ln2
        }
    };
    let mut sum = integrand(-half) + integrand(half);
    for k in 1..n_intervals {
        let z = -half + k as f64 * h;
        sum += integrand(z) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let h_z = sum * h / 3.0;

    let h_cond = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2();
    Ok((h_z - h_cond).clamp(0.0, 1.0))
}

/// Holevo information of a beam-splitter eavesdropper on the BPSK alphabet,
/// in bits: `chi = h2((1 + c) / 2)` with `c = exp(-2 (1 - T) alpha^2)`, the
/// overlap of the two pure states in the lost fraction of the beam.
pub fn holevo_bpsk(alpha: f64, transmittance: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(Error::InvalidTransmittance(transmittance));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite, got {alpha}"
        )));
    }
    let c = (-2.0 * (1.0 - transmittance) * alpha * alpha).exp();
    Ok(binary_entropy((1.0 + c) / 2.0))
}

/// Asymptotic key-rate summary for one session.
#[derive(Debug, Clone, Copy)]
pub struct RateReport {
    pub mutual_info_bits: f64,
    pub holevo_bound_bits: f64,
    /// `beta * I_AB - chi`; may be negative on a dead channel.
    pub secret_fraction: f64,
    /// `max(0, secret_fraction) * n_key_symbols`.
    pub key_bits_expected: f64,
}

/// Evaluate the rate formula on a channel estimate.
pub fn rate_report(est: &ChannelEstimate, cfg: &SessionConfig) -> Result<RateReport> {
    let alpha = cfg.alphabet.alpha();
    let alpha_eff = est.t_hat.sqrt() * alpha;
    let variance = CONVENTION.shot_noise_variance + est.excess_hat;
    let mutual_info_bits = mutual_information(alpha_eff, variance)?;
    let holevo_bound_bits = holevo_bpsk(alpha, est.t_hat)?;
    let secret_fraction = cfg.reconciliation_efficiency * mutual_info_bits - holevo_bound_bits;
    let n_key_symbols = cfg.n_symbols.saturating_sub(est.n_used);
    Ok(RateReport {
        mutual_info_bits,
        holevo_bound_bits,
        secret_fraction,
        key_bits_expected: secret_fraction.max(0.0) * n_key_symbols as f64,
    })
}
