//! The trusted-node satellite network: per-station key stores, weather-gated
//! key production, XOR broadcast relay, and service accounting.
//!
//! The satellite holds a mirror of every station's unconsumed key material.
//! When two stations request a shared key it broadcasts the XOR of their
//! oldest material; each station recovers the peer's key by XORing the
//! broadcast with its own copy, and the consumed frames are destroyed on
//! both sides. The satellite is modeled as honest.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::bits::{self, Bits};
use crate::channel::{WeatherGate, WeatherState};
use crate::error::{Error, Result};
use crate::postprocess::{
    amplify, cascade_reconcile, extract_raw, AmplifyOutcome, FrameId, Transcript,
};
use crate::protocol::{
    estimate_channel, partition_indices, rate_report, run_quantum_phase, SessionConfig,
};
use crate::qrng::vacuum_bits;
use crate::rng::StreamRng;

/// Classical post-processing knobs shared by every station.
#[derive(Debug, Clone, Copy)]
pub struct PostprocessParams {
    pub passes: usize,
    pub initial_block: usize,
    pub security_margin_bits: usize,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        PostprocessParams {
            passes: 4,
            initial_block: 8,
            security_margin_bits: 32,
        }
    }
}

/// One station's static description, as handed to the network.
#[derive(Debug, Clone)]
pub struct StationSpec {
    pub station_id: String,
    pub session: SessionConfig,
    pub weather: WeatherGate,
}

/// A deposited, ready-to-use key frame.
#[derive(Debug, Clone)]
pub struct StoredFrame {
    pub id: FrameId,
    pub bits: Bits,
}

#[derive(Debug)]
pub struct GroundStation {
    pub station_id: String,
    pub session: SessionConfig,
    pub weather: WeatherGate,
    /// Unconsumed key material, oldest first.
    key_store: VecDeque<StoredFrame>,
    /// Material consumed by a broadcast, retained for pair-key derivation.
    retired: BTreeMap<FrameId, Bits>,
    pub key_bits_produced: u64,
    pub frames_produced: u64,
    pub good_steps: u64,
}

impl GroundStation {
    pub fn available_key_bits(&self) -> usize {
        self.key_store.iter().map(|f| f.bits.len()).sum()
    }

    pub fn unconsumed_frames(&self) -> impl Iterator<Item = &StoredFrame> {
        self.key_store.iter()
    }
}

/// One completed XOR broadcast.
#[derive(Debug, Clone)]
pub struct BroadcastRecord {
    pub station_a: String,
    pub station_b: String,
    pub frames_a: Vec<FrameId>,
    pub frames_b: Vec<FrameId>,
    pub payload: Bits,
}

/// Per-station, per-step simulation metrics (one row of the metrics table).
#[derive(Debug, Clone)]
pub struct StepMetrics {
    pub step: u64,
    pub station_id: String,
    pub weather: WeatherState,
    pub t_effective: f64,
    pub ber: f64,
    pub mutual_info_bits: f64,
    pub holevo_bound_bits: f64,
    pub secret_fraction: f64,
    pub key_bits: u64,
}

impl StepMetrics {
    fn idle(step: u64, station_id: &str, weather: WeatherState) -> Self {
        StepMetrics {
            step,
            station_id: station_id.to_string(),
            weather,
            t_effective: 0.0,
            ber: 0.0,
            mutual_info_bits: 0.0,
            holevo_bound_bits: 0.0,
            secret_fraction: 0.0,
            key_bits: 0,
        }
    }
}

/// User-supplied cost inputs for the service report; the simulator invents
/// no prices of its own.
#[derive(Debug, Clone, Copy)]
pub struct CostInputs {
    pub total_cost: f64,
    /// Amortization horizon in steps; defaults to the simulated step count.
    pub horizon_steps: Option<u64>,
}

/// Cost quotient: total cost over delivered volume; `None` when nothing was
/// delivered (reported as unavailable, never as infinity).
pub fn cost_per_kbit(total_cost: f64, delivered_kbits: f64) -> Option<f64> {
    if delivered_kbits > 0.0 {
        Some(total_cost / delivered_kbits)
    } else {
        None
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationReport {
    pub station_id: String,
    pub key_bits_produced: u64,
    pub frames_produced: u64,
    pub availability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub station_a: String,
    pub station_b: String,
    pub delivered_bits: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ServiceReport {
    pub steps: u64,
    pub stations: Vec<StationReport>,
    pub pairs: Vec<PairReport>,
    pub delivered_kbits_total: f64,
    /// Delivered volume extrapolated to the amortization horizon.
    pub horizon_kbits: f64,
    pub cost_per_kbit: Option<f64>,
}

/// The satellite plus its ground stations.
#[derive(Debug)]
pub struct RelayNetwork {
    stations: Vec<GroundStation>,
    /// Satellite-side mirror of each station's unconsumed material.
    satellite_store: Vec<VecDeque<StoredFrame>>,
    broadcast_log: Vec<BroadcastRecord>,
    postprocess: PostprocessParams,
    master_seed: u64,
    steps_run: u64,
    /// When set, reconciliation transcripts are retained for export.
    pub emit_transcripts: bool,
    transcripts: Vec<Transcript>,
}

impl RelayNetwork {
    pub fn new(
        master_seed: u64,
        postprocess: PostprocessParams,
        specs: Vec<StationSpec>,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidParameter(
                "a relay network needs at least one station".into(),
            ));
        }
        for spec in &specs {
            spec.session.validate()?;
        }
        let n = specs.len();
        Ok(RelayNetwork {
            stations: specs
                .into_iter()
                .map(|s| GroundStation {
                    station_id: s.station_id,
                    session: s.session,
                    weather: s.weather,
                    key_store: VecDeque::new(),
                    retired: BTreeMap::new(),
                    key_bits_produced: 0,
                    frames_produced: 0,
                    good_steps: 0,
                })
                .collect(),
            satellite_store: vec![VecDeque::new(); n],
            broadcast_log: Vec::new(),
            postprocess,
            master_seed,
            steps_run: 0,
            emit_transcripts: false,
            transcripts: Vec::new(),
        })
    }

    pub fn stations(&self) -> &[GroundStation] {
        &self.stations
    }

    pub fn steps_run(&self) -> u64 {
        self.steps_run
    }

    pub fn broadcast_log(&self) -> &[BroadcastRecord] {
        &self.broadcast_log
    }

    pub fn transcripts(&self) -> &[Transcript] {
        &self.transcripts
    }

    pub fn station_index(&self, station_id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.station_id == station_id)
    }

    /// A station's stream depends only on the master seed and its own id, so
    /// its production is identical no matter which other stations share the
    /// network.
    fn station_stream(&self, station_id: &str) -> StreamRng {
        StreamRng::new(self.master_seed).substream_named(station_id)
    }

    /// Advance every station by one time step.
    ///
    /// Each station's weather gate makes one Markov transition; stations in
    /// good weather run a full session (QRNG, quantum phase, estimation,
    /// extraction, reconciliation, amplification) and deposit any resulting
    /// key frame in both the station store and the satellite mirror. Frames
    /// whose rate report shows no positive secret fraction, whose raw error
    /// rate is beyond Cascade's limit, or which fail verification are
    /// dropped for this step; both are ordinary protocol outcomes.
    pub fn step(&mut self) -> Result<Vec<StepMetrics>> {
        let step = self.steps_run;
        let mut rows = Vec::with_capacity(self.stations.len());
        for idx in 0..self.stations.len() {
            let stream = self
                .station_stream(&self.stations[idx].station_id)
                .substream(step);
            let row = self.run_station_step(idx, step, stream)?;
            rows.push(row);
        }
        self.steps_run += 1;
        Ok(rows)
    }

    fn run_station_step(
        &mut self,
        idx: usize,
        step: u64,
        step_rng: StreamRng,
    ) -> Result<StepMetrics> {
        let station = &mut self.stations[idx];
        station.weather.step(&mut step_rng.substream_named("weather"));
        if !station.weather.is_good() {
            return Ok(StepMetrics::idle(step, &station.station_id, WeatherState::Bad));
        }
        station.good_steps += 1;

        let cfg = station.session.clone();
        let tx = vacuum_bits(cfg.n_symbols, &mut step_rng.substream_named("qrng"));
        let record = run_quantum_phase(&cfg, &tx, &mut step_rng.substream_named("quantum"))?;
        let partition = partition_indices(
            cfg.n_symbols,
            cfg.estimation_fraction,
            &mut step_rng.substream_named("sift"),
        );
        let estimate =
            estimate_channel(&record.tx_record, &record.rx_batch, &partition.estimation, &cfg)?;
        let rate = rate_report(&estimate, &cfg)?;

        let frame_id = FrameId {
            station: idx as u32,
            step,
        };
        let frame = extract_raw(
            &record.tx_record,
            &record.rx_batch,
            &partition.key,
            &partition.estimation,
            frame_id,
        )?;

        let mut metrics = StepMetrics {
            step,
            station_id: station.station_id.clone(),
            weather: WeatherState::Good,
            t_effective: estimate.t_hat,
            ber: frame.bit_error_rate(),
            mutual_info_bits: rate.mutual_info_bits,
            holevo_bound_bits: rate.holevo_bound_bits,
            secret_fraction: rate.secret_fraction,
            key_bits: 0,
        };

        if rate.secret_fraction <= 0.0 {
            return Ok(metrics);
        }

        let reconciled = match cascade_reconcile(
            frame,
            self.postprocess.passes,
            self.postprocess.initial_block,
            &mut step_rng.substream_named("cascade"),
        ) {
            Ok((frame, transcript)) => {
                if self.emit_transcripts {
                    self.transcripts.push(transcript);
                }
                frame
            }
            Err(Error::BerTooHigh(_)) | Err(Error::ReconciliationFailed(_)) => {
                return Ok(metrics);
            }
            Err(e) => return Err(e),
        };

        match amplify(
            reconciled,
            rate.secret_fraction,
            self.postprocess.security_margin_bits,
            &mut step_rng.substream_named("amplify"),
        )? {
            AmplifyOutcome::Key(key) => {
                metrics.key_bits = key.len() as u64;
                let station = &mut self.stations[idx];
                station.key_bits_produced += key.len() as u64;
                station.frames_produced += 1;
                let stored = StoredFrame {
                    id: key.frame_id,
                    bits: key.bob_bits,
                };
                station.key_store.push_back(stored.clone());
                self.satellite_store[idx].push_back(stored);
            }
            AmplifyOutcome::Discarded { .. } => {}
        }
        Ok(metrics)
    }

    /// Deposit externally produced key material for one station (mirrored on
    /// the satellite). Mainly for tests and store replay.
    pub fn deposit_frame(&mut self, station: usize, step: u64, bits: Bits) -> Result<FrameId> {
        if station >= self.stations.len() {
            return Err(Error::UnknownStation(station));
        }
        let id = FrameId {
            station: station as u32,
            step,
        };
        let frame = StoredFrame { id, bits };
        self.stations[station].key_store.push_back(frame.clone());
        self.satellite_store[station].push_back(frame);
        Ok(id)
    }

    /// Pop whole frames (oldest first) until at least `n_bits` are gathered.
    fn consume_frames(&mut self, station: usize, n_bits: usize) -> Result<(Vec<FrameId>, Bits)> {
        let available = self.stations[station].available_key_bits();
        if available < n_bits {
            return Err(Error::InsufficientKey {
                station: self.stations[station].station_id.clone(),
                available,
                requested: n_bits,
            });
        }
        let mut ids = Vec::new();
        let mut material = Bits::new();
        while material.len() < n_bits {
            let sat = self.satellite_store[station]
                .pop_front()
                .ok_or_else(|| Error::StoreInconsistent(self.stations[station].station_id.clone()))?;
            let own = self.stations[station]
                .key_store
                .pop_front()
                .ok_or_else(|| Error::StoreInconsistent(self.stations[station].station_id.clone()))?;
            if sat.id != own.id || sat.bits != own.bits {
                return Err(Error::StoreInconsistent(
                    self.stations[station].station_id.clone(),
                ));
            }
            material.extend_from_bitslice(&own.bits);
            ids.push(own.id);
            self.stations[station].retired.insert(own.id, own.bits);
        }
        material.truncate(n_bits);
        Ok((ids, material))
    }

    /// Broadcast the XOR of two stations' keys over the oldest unconsumed
    /// material. Whole frames are consumed; any surplus bits in the last
    /// frame are destroyed with it.
    pub fn broadcast_xor(
        &mut self,
        station_a: usize,
        station_b: usize,
        n_bits: usize,
    ) -> Result<BroadcastRecord> {
        for s in [station_a, station_b] {
            if s >= self.stations.len() {
                return Err(Error::UnknownStation(s));
            }
        }
        if station_a == station_b {
            return Err(Error::InvalidParameter(
                "broadcast requires two distinct stations".into(),
            ));
        }
        // Check both sides before consuming either.
        for s in [station_a, station_b] {
            let available = self.stations[s].available_key_bits();
            if available < n_bits {
                return Err(Error::InsufficientKey {
                    station: self.stations[s].station_id.clone(),
                    available,
                    requested: n_bits,
                });
            }
        }
        let (frames_a, key_a) = self.consume_frames(station_a, n_bits)?;
        let (frames_b, key_b) = self.consume_frames(station_b, n_bits)?;
        let record = BroadcastRecord {
            station_a: self.stations[station_a].station_id.clone(),
            station_b: self.stations[station_b].station_id.clone(),
            frames_a,
            frames_b,
            payload: bits::xor(&key_a, &key_b),
        };
        self.broadcast_log.push(record.clone());
        Ok(record)
    }

    /// A station turns a broadcast payload into the pair key by XORing in
    /// its own (already consumed) material; the result equals the peer's
    /// key material bit for bit.
    pub fn derive_pair_key(
        &self,
        station: usize,
        payload: &Bits,
        frame_refs: &[FrameId],
    ) -> Result<Bits> {
        let st = self
            .stations
            .get(station)
            .ok_or(Error::UnknownStation(station))?;
        let mut own = Bits::new();
        for id in frame_refs {
            let bits = st.retired.get(id).ok_or_else(|| Error::UnknownFrame {
                station: st.station_id.clone(),
                frame: id.to_string(),
            })?;
            own.extend_from_bitslice(bits);
        }
        if own.len() < payload.len() {
            return Err(Error::InvalidParameter(format!(
                "referenced material holds {} bits, payload needs {}",
                own.len(),
                payload.len()
            )));
        }
        own.truncate(payload.len());
        Ok(bits::xor(payload, &own))
    }

    /// Throughput, availability, delivery, and amortized cost summary.
    pub fn service_report(&self, cost: &CostInputs) -> ServiceReport {
        let steps = self.steps_run;
        let stations = self
            .stations
            .iter()
            .map(|s| StationReport {
                station_id: s.station_id.clone(),
                key_bits_produced: s.key_bits_produced,
                frames_produced: s.frames_produced,
                availability: if steps > 0 {
                    s.good_steps as f64 / steps as f64
                } else {
                    0.0
                },
            })
            .collect();

        let mut delivered: BTreeMap<(String, String), u64> = BTreeMap::new();
        for rec in &self.broadcast_log {
            let key = if rec.station_a <= rec.station_b {
                (rec.station_a.clone(), rec.station_b.clone())
            } else {
                (rec.station_b.clone(), rec.station_a.clone())
            };
            *delivered.entry(key).or_insert(0) += rec.payload.len() as u64;
        }
        let pairs: Vec<PairReport> = delivered
            .into_iter()
            .map(|((a, b), bits)| PairReport {
                station_a: a,
                station_b: b,
                delivered_bits: bits,
            })
            .collect();

        let delivered_bits_total: u64 = pairs.iter().map(|p| p.delivered_bits).sum();
        let delivered_kbits_total = delivered_bits_total as f64 / 1000.0;
        let horizon = cost.horizon_steps.unwrap_or(steps);
        let horizon_kbits = if steps > 0 {
            delivered_kbits_total * horizon as f64 / steps as f64
        } else {
            0.0
        };

        ServiceReport {
            steps,
            stations,
            pairs,
            delivered_kbits_total,
            horizon_kbits,
            cost_per_kbit: cost_per_kbit(cost.total_cost, horizon_kbits),
        }
    }

    /// Line-delimited broadcast log:
    /// `station_a,station_b,frames_a,frames_b,n_bits,payload_hex`.
    pub fn broadcast_log_lines(&self) -> String {
        let mut out = String::new();
        for rec in &self.broadcast_log {
            let frames = |ids: &[FrameId]| {
                ids.iter()
                    .map(|id| id.to_string())
                    .collect::<Vec<_>>()
                    .join("+")
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.station_a,
                rec.station_b,
                frames(&rec.frames_a),
                frames(&rec.frames_b),
                rec.payload.len(),
                bits::to_hex(&rec.payload),
            ));
        }
        out
    }
}
