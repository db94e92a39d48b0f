//! Scenario files: a strict TOML schema for whole simulation runs.
//!
//! Unknown keys are rejected (the parser names the offending field and the
//! accepted ones), and every physical parameter is range-checked at load
//! time with the violated bound in the message. Omitted optional fields take
//! the documented defaults.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::channel::{
    ChannelModel, FadingModel, FiberChannel, FreeSpaceChannel, WeatherGate, WeatherState,
    DEFAULT_FIBER_ATTENUATION_DB_PER_KM,
};
use crate::phase_space::BpskAlphabet;
use crate::protocol::{SessionConfig, MIN_ESTIMATION_SYMBOLS};
use crate::relay::{CostInputs, PostprocessParams, StationSpec};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}:\n{message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

/// Sane session defaults for a mild link; all overridable per station.
const DEFAULT_ALPHA: f64 = 0.55;
const DEFAULT_N_SYMBOLS: usize = 2_000;
const DEFAULT_ESTIMATION_FRACTION: f64 = 0.3;
const DEFAULT_EXCESS_NOISE: f64 = 0.005;
const DEFAULT_RECONCILIATION_EFFICIENCY: f64 = 0.95;
const DEFAULT_STEPS: u64 = 50;
const DEFAULT_CHUNK_BITS: usize = 256;

fn default_steps() -> u64 {
    DEFAULT_STEPS
}

fn default_out_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Global seed; every stream in the run derives from it.
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub emit_transcripts: bool,
    #[serde(default)]
    pub postprocess: PostprocessSection,
    #[serde(default)]
    pub cost: Option<CostSection>,
    #[serde(default)]
    pub delivery: DeliverySection,
    pub stations: Vec<StationSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocessSection {
    #[serde(default = "PostprocessSection::default_passes")]
    pub passes: usize,
    #[serde(default = "PostprocessSection::default_initial_block")]
    pub initial_block: usize,
    #[serde(default = "PostprocessSection::default_margin")]
    pub security_margin_bits: usize,
}

impl PostprocessSection {
    fn default_passes() -> usize {
        4
    }
    fn default_initial_block() -> usize {
        8
    }
    fn default_margin() -> usize {
        32
    }
}

impl Default for PostprocessSection {
    fn default() -> Self {
        PostprocessSection {
            passes: Self::default_passes(),
            initial_block: Self::default_initial_block(),
            security_margin_bits: Self::default_margin(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// Total program cost in user currency units.
    pub total_cost: f64,
    /// Amortization horizon in steps (defaults to the run length).
    #[serde(default)]
    pub horizon_steps: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeliverySection {
    /// Pair-key request size; a broadcast fires whenever both stations of a
    /// pair hold at least this much unconsumed material.
    #[serde(default = "DeliverySection::default_chunk_bits")]
    pub chunk_bits: usize,
    /// Station-id pairs served by the relay; defaults to all pairs.
    #[serde(default)]
    pub pairs: Option<Vec<(String, String)>>,
}

impl DeliverySection {
    fn default_chunk_bits() -> usize {
        DEFAULT_CHUNK_BITS
    }
}

impl Default for DeliverySection {
    fn default() -> Self {
        DeliverySection {
            chunk_bits: Self::default_chunk_bits(),
            pairs: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSection {
    pub id: String,
    pub channel: ChannelSection,
    #[serde(default)]
    pub session: SessionSection,
    #[serde(default)]
    pub fading: FadingSection,
    #[serde(default)]
    pub weather: WeatherSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSection {
    FreeSpace(FreeSpaceSection),
    Fiber(FiberSection),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeSpaceSection {
    pub link_distance_km: f64,
    #[serde(default = "FreeSpaceSection::default_waist")]
    pub tx_beam_waist_m: f64,
    #[serde(default = "FreeSpaceSection::default_wavelength")]
    pub wavelength_m: f64,
    #[serde(default = "FreeSpaceSection::default_aperture")]
    pub rx_aperture_radius_m: f64,
    #[serde(default = "FreeSpaceSection::default_pointing")]
    pub pointing_efficiency: f64,
    #[serde(default)]
    pub atmospheric_loss_db: f64,
}

impl FreeSpaceSection {
    fn default_waist() -> f64 {
        crate::channel::DEFAULT_TX_WAIST_M
    }
    fn default_wavelength() -> f64 {
        crate::channel::DEFAULT_WAVELENGTH_M
    }
    fn default_aperture() -> f64 {
        crate::channel::DEFAULT_RX_APERTURE_RADIUS_M
    }
    fn default_pointing() -> f64 {
        crate::channel::DEFAULT_POINTING_EFFICIENCY
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub length_km: f64,
    #[serde(default = "FiberSection::default_attenuation")]
    pub attenuation_db_per_km: f64,
}

impl FiberSection {
    fn default_attenuation() -> f64 {
        DEFAULT_FIBER_ATTENUATION_DB_PER_KM
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    #[serde(default = "SessionSection::default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub phase_offset: f64,
    #[serde(default = "SessionSection::default_n_symbols")]
    pub n_symbols: usize,
    #[serde(default = "SessionSection::default_estimation_fraction")]
    pub estimation_fraction: f64,
    #[serde(default = "SessionSection::default_excess_noise")]
    pub excess_noise: f64,
    #[serde(default = "SessionSection::default_beta")]
    pub reconciliation_efficiency: f64,
}

impl SessionSection {
    fn default_alpha() -> f64 {
        DEFAULT_ALPHA
    }
    fn default_n_symbols() -> usize {
        DEFAULT_N_SYMBOLS
    }
    fn default_estimation_fraction() -> f64 {
        DEFAULT_ESTIMATION_FRACTION
    }
    fn default_excess_noise() -> f64 {
        DEFAULT_EXCESS_NOISE
    }
    fn default_beta() -> f64 {
        DEFAULT_RECONCILIATION_EFFICIENCY
    }
}

impl Default for SessionSection {
    fn default() -> Self {
        SessionSection {
            alpha: Self::default_alpha(),
            phase_offset: 0.0,
            n_symbols: Self::default_n_symbols(),
            estimation_fraction: Self::default_estimation_fraction(),
            excess_noise: Self::default_excess_noise(),
            reconciliation_efficiency: Self::default_beta(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FadingSection {
    #[serde(default)]
    pub scintillation_index: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherSection {
    #[serde(default)]
    pub p_good_to_bad: f64,
    #[serde(default = "WeatherSection::default_recovery")]
    pub p_bad_to_good: f64,
    #[serde(default = "WeatherSection::default_initial")]
    pub initial: WeatherState,
}

impl WeatherSection {
    fn default_recovery() -> f64 {
        1.0
    }
    fn default_initial() -> WeatherState {
        WeatherState::Good
    }
}

impl Default for WeatherSection {
    fn default() -> Self {
        WeatherSection {
            p_good_to_bad: 0.0,
            p_bad_to_good: Self::default_recovery(),
            initial: Self::default_initial(),
        }
    }
}

/// A fully validated scenario, ready to drive the simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub steps: u64,
    pub out_dir: String,
    pub emit_transcripts: bool,
    pub postprocess: PostprocessParams,
    pub cost: CostInputs,
    pub delivery_chunk_bits: usize,
    /// Station-id pairs served by the relay during `run`.
    pub delivery_pairs: Vec<(String, String)>,
    pub stations: Vec<StationSpec>,
}

/// Load and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scenario_from_toml(&text).map_err(|e| match e {
        ScenarioError::Parse { message, .. } => ScenarioError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Parse and validate scenario TOML text.
pub fn scenario_from_toml(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        path: "<inline>".to_string(),
        message: e.to_string(),
    })?;
    validate(file)
}

fn validate(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let fail = |msg: String| Err(ScenarioError::Validation(msg));

    if file.steps == 0 {
        return fail("steps: must be >= 1".into());
    }
    if file.stations.is_empty() {
        return fail("stations: at least one station is required".into());
    }
    if file.postprocess.passes == 0 || file.postprocess.initial_block == 0 {
        return fail("postprocess: passes and initial_block must be >= 1".into());
    }
    if file.delivery.chunk_bits == 0 {
        return fail("delivery.chunk_bits: must be >= 1".into());
    }

    let mut ids = std::collections::HashSet::new();
    let mut stations = Vec::with_capacity(file.stations.len());
    for (i, st) in file.stations.iter().enumerate() {
        let at = |field: &str| format!("stations[{i}].{field}");
        if st.id.is_empty() {
            return fail(format!("{}: must not be empty", at("id")));
        }
        if !ids.insert(st.id.clone()) {
            return fail(format!("{}: duplicate station id {:?}", at("id"), st.id));
        }

        let channel = match &st.channel {
            ChannelSection::FreeSpace(fs) => ChannelModel::FreeSpace(
                FreeSpaceChannel::new(
                    fs.link_distance_km,
                    fs.tx_beam_waist_m,
                    fs.wavelength_m,
                    fs.rx_aperture_radius_m,
                    fs.pointing_efficiency,
                    fs.atmospheric_loss_db,
                )
                .map_err(|e| ScenarioError::Validation(format!("{}: {e}", at("channel"))))?,
            ),
            ChannelSection::Fiber(fb) => ChannelModel::Fiber(
                FiberChannel::new(fb.attenuation_db_per_km, fb.length_km)
                    .map_err(|e| ScenarioError::Validation(format!("{}: {e}", at("channel"))))?,
            ),
        };
        let t = channel.transmittance();
        if !(t > 0.0 && t <= 1.0) {
            return fail(format!(
                "{}: net transmittance {t:e} violates the (0, 1] bound",
                at("channel")
            ));
        }

        let s = &st.session;
        if s.n_symbols < 1_000 {
            return fail(format!(
                "{}: must be >= 1000, got {}",
                at("session.n_symbols"),
                s.n_symbols
            ));
        }
        if !(s.estimation_fraction > 0.0 && s.estimation_fraction < 1.0) {
            return fail(format!(
                "{}: must lie in (0, 1), got {}",
                at("session.estimation_fraction"),
                s.estimation_fraction
            ));
        }
        let n_est = ((s.n_symbols as f64 * s.estimation_fraction).round() as usize)
            .clamp(1, s.n_symbols - 1);
        if n_est < MIN_ESTIMATION_SYMBOLS {
            return fail(format!(
                "{}: estimation subset would hold {n_est} symbols, need >= {MIN_ESTIMATION_SYMBOLS}",
                at("session.estimation_fraction")
            ));
        }
        let alphabet = BpskAlphabet::new(s.alpha, s.phase_offset)
            .map_err(|e| ScenarioError::Validation(format!("{}: {e}", at("session"))))?;
        let fading = FadingModel::new(st.fading.scintillation_index)
            .map_err(|e| ScenarioError::Validation(format!("{}: {e}", at("fading"))))?;
        let weather = WeatherGate::new(
            st.weather.p_good_to_bad,
            st.weather.p_bad_to_good,
            st.weather.initial,
        )
        .map_err(|e| ScenarioError::Validation(format!("{}: {e}", at("weather"))))?;

        let session = SessionConfig {
            alphabet,
            n_symbols: s.n_symbols,
            estimation_fraction: s.estimation_fraction,
            channel,
            fading,
            excess_noise_true: s.excess_noise,
            reconciliation_efficiency: s.reconciliation_efficiency,
        };
        session
            .validate()
            .map_err(|e| ScenarioError::Validation(format!("{}: {e}", at("session"))))?;

        stations.push(StationSpec {
            station_id: st.id.clone(),
            session,
            weather,
        });
    }

    // Delivery pairs: default is every unordered pair.
    let delivery_pairs = match &file.delivery.pairs {
        Some(pairs) => {
            for (a, b) in pairs {
                if a == b {
                    return fail(format!("delivery.pairs: pair ({a}, {b}) is degenerate"));
                }
                for id in [a, b] {
                    if !ids.contains(id) {
                        return fail(format!("delivery.pairs: unknown station id {id:?}"));
                    }
                }
            }
            pairs.clone()
        }
        None => {
            let mut pairs = Vec::new();
            for i in 0..stations.len() {
                for j in i + 1..stations.len() {
                    pairs.push((
                        stations[i].station_id.clone(),
                        stations[j].station_id.clone(),
                    ));
                }
            }
            pairs
        }
    };

    let cost = match &file.cost {
        Some(c) => {
            if !(c.total_cost >= 0.0) || !c.total_cost.is_finite() {
                return fail(format!(
                    "cost.total_cost: must be >= 0, got {}",
                    c.total_cost
                ));
            }
            CostInputs {
                total_cost: c.total_cost,
                horizon_steps: c.horizon_steps,
            }
        }
        None => CostInputs {
            total_cost: 0.0,
            horizon_steps: None,
        },
    };

    Ok(Scenario {
        seed: file.seed,
        steps: file.steps,
        out_dir: file.out_dir,
        emit_transcripts: file.emit_transcripts,
        postprocess: PostprocessParams {
            passes: file.postprocess.passes,
            initial_block: file.postprocess.initial_block,
            security_margin_bits: file.postprocess.security_margin_bits,
        },
        cost,
        delivery_chunk_bits: file.delivery.chunk_bits,
        delivery_pairs,
        stations,
    })
}
