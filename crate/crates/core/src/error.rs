//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite amplitude ({amp_i}, {amp_q})")]
    NonFiniteAmplitude { amp_i: f64, amp_q: f64 },

    #[error("invalid BPSK alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("homodyne batch must contain at least one sample")]
    EmptyBatch,

    #[error("extra variance must be >= 0, got {0}")]
    NegativeVariance(f64),

    #[error("variance must be > 0, got {0}")]
    NonPositiveVariance(f64),

    #[error("bit buffer is empty")]
    EmptyBitBuffer,

    #[error("transmittance must lie in (0, 1], got {0}")]
    InvalidTransmittance(f64),

    #[error("need {needed} transmitter bits, buffer holds {got}")]
    InsufficientBits { needed: usize, got: usize },

    #[error("estimation subset must hold at least {needed} symbols, got {got}")]
    EstimationSubsetTooSmall { needed: usize, got: usize },

    #[error("estimation subset is degenerate: all disclosed bits are equal")]
    DegenerateEstimationSet,

    #[error("channel estimation needs a nonzero modulation amplitude")]
    ZeroAlphaEstimation,

    #[error("index {index} out of range for record of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("key indices overlap the estimation set at index {0}")]
    IndexOverlap(usize),

    #[error("operation requires a {expected} frame, got {got}")]
    WrongStage {
        expected: &'static str,
        got: &'static str,
    },

    #[error("bit error rate {0:.4} exceeds the reconciliation limit 0.25")]
    BerTooHigh(f64),

    #[error("reconciliation verification hash mismatch on frame {0}")]
    ReconciliationFailed(String),

    #[error("Toeplitz input length {got} does not match n_in = {expected}")]
    ToeplitzLengthMismatch { expected: usize, got: usize },

    #[error("invalid Toeplitz seed: {0}")]
    InvalidToeplitzSeed(String),

    #[error("station {station} holds {available} unconsumed key bits, {requested} requested")]
    InsufficientKey {
        station: String,
        available: usize,
        requested: usize,
    },

    #[error("unknown station index {0}")]
    UnknownStation(usize),

    #[error("station {station} does not hold frame {frame}")]
    UnknownFrame { station: String, frame: String },

    #[error("satellite and station key stores disagree on frame order for station {0}")]
    StoreInconsistent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
