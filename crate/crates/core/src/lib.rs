//! Simulator of a satellite continuous-variable QKD network.
//!
//! A GEO satellite modulates weak coherent states in a BPSK alphabet and
//! sends them to ground stations, which perform homodyne detection and
//! distill secret keys from the quadrature record. The satellite acts as a
//! trusted node: it stores a key with every station and, on request,
//! broadcasts the XOR of two stations' keys so that exactly those two
//! stations end up with a shared secret.
//!
//! The crate is organized along the processing chain:
//!
//! * [`phase_space`] — coherent states, the BPSK alphabet, homodyne sampling
//! * [`qrng`] — random bits from vacuum homodyne measurements
//! * [`channel`] — fiber and free-space loss models, fading, weather
//! * [`protocol`] — one QKD session: modulation, detection, estimation, rates
//! * [`postprocess`] — sign extraction, Cascade reconciliation, Toeplitz
//!   privacy amplification
//! * [`relay`] — the multi-station trusted-node network and its reports
//! * [`scenario`] / [`driver`] — config files and the simulation driver
//!   behind the `geoqkd` command-line tool
//!
//! Every stochastic operation takes an explicit [`rng::StreamRng`]; runs are
//! bit-reproducible given the scenario seed.

pub mod bits;
pub mod channel;
pub mod driver;
pub mod error;
pub mod phase_space;
pub mod postprocess;
pub mod protocol;
pub mod qrng;
pub mod relay;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
