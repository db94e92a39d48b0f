//! Optical channel models: fiber attenuation, free-space diffraction,
//! atmospheric fading, and a two-state weather gate.
//!
//! The two loss laws carry the long-haul argument of the simulator: fiber
//! loss in dB is exactly linear in length (transmittance exponential), while
//! a diffraction-limited free-space link loses 20*log10(L) dB in the far
//! field, so beyond a crossover distance the free-space channel always wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{CoherentState, CONVENTION};
use crate::rng::StreamRng;

/// Config default, typical of 1550 nm-class fiber. Not a paper value.
pub const DEFAULT_FIBER_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// GEO slant range, km. The one distance the scenario inherits from the
/// geostationary setting.
pub const GEO_DISTANCE_KM: f64 = 36_000.0;

/// Default downlink beam and receiver geometry (config defaults).
pub const DEFAULT_TX_WAIST_M: f64 = 0.0675;
pub const DEFAULT_WAVELENGTH_M: f64 = 1.064e-6;
pub const DEFAULT_RX_APERTURE_RADIUS_M: f64 = 0.5;
pub const DEFAULT_POINTING_EFFICIENCY: f64 = 0.9;
pub const DEFAULT_ATMOSPHERIC_LOSS_DB: f64 = 3.0;

/// A fiber span: transmittance `10^(-a L / 10)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberChannel {
    pub attenuation_db_per_km: f64,
    pub length_km: f64,
}

impl FiberChannel {
    pub fn new(attenuation_db_per_km: f64, length_km: f64) -> Result<Self> {
        if !(attenuation_db_per_km > 0.0) || !attenuation_db_per_km.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "fiber attenuation must be > 0 dB/km, got {attenuation_db_per_km}"
            )));
        }
        if !(length_km >= 0.0) || !length_km.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "fiber length must be >= 0 km, got {length_km}"
            )));
        }
        Ok(Self {
            attenuation_db_per_km,
            length_km,
        })
    }

    /// Loss in dB; exactly linear in length.
    pub fn loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db() / 10.0)
    }
}

/// A diffraction-limited free-space link with a Gaussian transmit beam and a
/// circular receive aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceChannel {
    pub link_distance_km: f64,
    pub tx_beam_waist_m: f64,
    pub wavelength_m: f64,
    pub rx_aperture_radius_m: f64,
    pub pointing_efficiency: f64,
    pub atmospheric_loss_db: f64,
}

impl FreeSpaceChannel {
    pub fn new(
        link_distance_km: f64,
        tx_beam_waist_m: f64,
        wavelength_m: f64,
        rx_aperture_radius_m: f64,
        pointing_efficiency: f64,
        atmospheric_loss_db: f64,
    ) -> Result<Self> {
        let positive = [
            ("link_distance_km", link_distance_km),
            ("tx_beam_waist_m", tx_beam_waist_m),
            ("wavelength_m", wavelength_m),
            ("rx_aperture_radius_m", rx_aperture_radius_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(pointing_efficiency > 0.0 && pointing_efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pointing_efficiency must lie in (0, 1], got {pointing_efficiency}"
            )));
        }
        if !(atmospheric_loss_db >= 0.0) || !atmospheric_loss_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "atmospheric_loss_db must be >= 0, got {atmospheric_loss_db}"
            )));
        }
        Ok(Self {
            link_distance_km,
            tx_beam_waist_m,
            wavelength_m,
            rx_aperture_radius_m,
            pointing_efficiency,
            atmospheric_loss_db,
        })
    }

    /// The GEO downlink with the documented default geometry.
    pub fn geo_default() -> Self {
        Self {
            link_distance_km: GEO_DISTANCE_KM,
            tx_beam_waist_m: DEFAULT_TX_WAIST_M,
            wavelength_m: DEFAULT_WAVELENGTH_M,
            rx_aperture_radius_m: DEFAULT_RX_APERTURE_RADIUS_M,
            pointing_efficiency: DEFAULT_POINTING_EFFICIENCY,
            atmospheric_loss_db: DEFAULT_ATMOSPHERIC_LOSS_DB,
        }
    }

    /// Rayleigh range `pi w0^2 / lambda`, meters.
    pub fn rayleigh_range_m(&self) -> f64 {
        std::f64::consts::PI * self.tx_beam_waist_m * self.tx_beam_waist_m / self.wavelength_m
    }

    /// 1/e^2 intensity radius at the receiver,
    /// `w(L) = w0 sqrt(1 + (L/z_R)^2)`.
    pub fn beam_radius_at_rx_m(&self) -> f64 {
        let l = self.link_distance_km * 1e3;
        let zr = self.rayleigh_range_m();
        self.tx_beam_waist_m * (1.0 + (l / zr) * (l / zr)).sqrt()
    }

    /// Fraction of the Gaussian beam power captured by the circular
    /// aperture: `1 - exp(-2 r^2 / w(L)^2)`.
    pub fn diffraction_capture(&self) -> f64 {
        let w = self.beam_radius_at_rx_m();
        let r = self.rx_aperture_radius_m;
        -(-2.0 * r * r / (w * w)).exp_m1()
    }

    /// Total transmittance: diffraction capture times pointing efficiency
    /// times the fixed atmospheric loss.
    pub fn transmittance(&self) -> f64 {
        self.diffraction_capture()
            * self.pointing_efficiency
            * 10f64.powf(-self.atmospheric_loss_db / 10.0)
    }

    pub fn loss_db(&self) -> f64 {
        -10.0 * self.transmittance().log10()
    }
}

/// Either loss model behind a common interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelModel {
    FreeSpace(FreeSpaceChannel),
    Fiber(FiberChannel),
}

impl ChannelModel {
    pub fn transmittance(&self) -> f64 {
        match self {
            ChannelModel::FreeSpace(c) => c.transmittance(),
            ChannelModel::Fiber(c) => c.transmittance(),
        }
    }

    pub fn loss_db(&self) -> f64 {
        -10.0 * self.transmittance().log10()
    }
}

/// Pure-loss channel action on a coherent state: amplitude scales by
/// `sqrt(T)`, and the receiver sees homodyne variance
/// `shot_noise_variance + excess_noise` (excess noise is referred to the
/// receiver, in shot-noise units).
pub fn apply_channel(
    state: CoherentState,
    transmittance: f64,
    excess_noise: f64,
) -> Result<(CoherentState, f64)> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(Error::InvalidTransmittance(transmittance));
    }
    if !(excess_noise >= 0.0) || !excess_noise.is_finite() {
        return Err(Error::NegativeVariance(excess_noise));
    }
    Ok((
        state.scaled(transmittance.sqrt()),
        CONVENTION.shot_noise_variance + excess_noise,
    ))
}

/// Log-normal atmospheric fading with unit median. `scintillation_index` is
/// the variance of the log-transmittance fluctuations; draws above 1 are
/// clipped so a realization is always a valid transmittance factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    pub scintillation_index: f64,
}

impl FadingModel {
    pub const NONE: FadingModel = FadingModel {
        scintillation_index: 0.0,
    };

    pub fn new(scintillation_index: f64) -> Result<Self> {
        if !(scintillation_index >= 0.0) || !scintillation_index.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scintillation_index must be >= 0, got {scintillation_index}"
            )));
        }
        Ok(Self {
            scintillation_index,
        })
    }

    /// One multiplicative transmittance factor in (0, 1].
    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        if self.scintillation_index == 0.0 {
            return 1.0;
        }
        let x = self.scintillation_index.sqrt() * rng.standard_normal();
        x.exp().min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherState {
    Good,
    Bad,
}

/// Two-state Markov weather gate; key production is permitted only while the
/// gate is good, produced keys are stored until used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherGate {
    pub p_good_to_bad: f64,
    pub p_bad_to_good: f64,
    pub state: WeatherState,
}

impl WeatherGate {
    pub fn new(p_good_to_bad: f64, p_bad_to_good: f64, state: WeatherState) -> Result<Self> {
        for (name, p) in [
            ("p_good_to_bad", p_good_to_bad),
            ("p_bad_to_good", p_bad_to_good),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(Self {
            p_good_to_bad,
            p_bad_to_good,
            state,
        })
    }

    /// A gate that never turns bad.
    pub fn always_good() -> Self {
        Self {
            p_good_to_bad: 0.0,
            p_bad_to_good: 1.0,
            state: WeatherState::Good,
        }
    }

    /// One Markov transition.
    pub fn step(&mut self, rng: &mut StreamRng) {
        let u = rng.uniform();
        self.state = match self.state {
            WeatherState::Good => {
                if u < self.p_good_to_bad {
                    WeatherState::Bad
                } else {
                    WeatherState::Good
                }
            }
            WeatherState::Bad => {
                if u < self.p_bad_to_good {
                    WeatherState::Good
                } else {
                    WeatherState::Bad
                }
            }
        };
    }

    pub fn is_good(&self) -> bool {
        self.state == WeatherState::Good
    }

    /// Stationary fraction of good-weather steps, when both transition
    /// probabilities are nonzero.
    pub fn stationary_availability(&self) -> Option<f64> {
        if self.p_good_to_bad > 0.0 && self.p_bad_to_good > 0.0 {
            Some(self.p_bad_to_good / (self.p_good_to_bad + self.p_bad_to_good))
        } else {
            None
        }
    }
}
