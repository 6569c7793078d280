//! Slotted uplink access: grant-based exchange chains, grant-free replica
//! transmission, and coordinated grant-free access with fixed patterns.
//!
//! A frame holds `frame_len` slots. Each active device sends replicas of
//! its packet in the slots of its access pattern. A slot is clean when at
//! most `mpr_gamma` transmissions remain in it; with SIC, transmissions of
//! already decoded devices are removed from every slot. Every clean
//! replica gets one decoding attempt with probability `per_replica_success`.
//! With combining, a device instead decodes once
//! `1 - (1 - p)^(clean replicas so far)` exceeds its per-frame uniform draw.
//!
//! Random draws are made up front, so the decoded set is the least fixed
//! point of a monotone operator. The receiver processes slots in time
//! order; a device's latency is `(t + 1) * slot_duration` where `t` is the
//! first slot after which it is decodable. Packets still undecoded at the
//! end of the frame are dropped.

use std::io::Write;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reliability::{Latency, LatencyCdf, ProtocolChain};
use crate::seed::{child_rng, derive_seed, rng_from_seed};

/// Replica slots of one device inside a frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessPattern {
    /// Seed the pattern was generated from; `None` for orthogonal blocks.
    pub seed: Option<u64>,
    pub frame_len: usize,
    pub slots: Vec<usize>,
}

impl AccessPattern {
    pub fn k_replicas(&self) -> usize {
        self.slots.len()
    }

    pub fn overlap(&self, other: &AccessPattern) -> usize {
        self.slots.iter().filter(|s| other.slots.contains(s)).count()
    }
}

/// `k_replicas` distinct uniformly drawn slots, sorted, fully determined by the arguments.
pub fn generate_access_pattern(seed: u64, frame_len: usize, k_replicas: usize) -> Result<AccessPattern> {
    if k_replicas == 0 {
        return Err(Error::Usage("need at least one replica".into()));
    }
    if k_replicas > frame_len {
        return Err(Error::Usage(format!("{k_replicas} replicas do not fit in {frame_len} slots")));
    }
    let mut rng = rng_from_seed(seed);
    let mut slots = sample(&mut rng, frame_len, k_replicas).into_vec();
    slots.sort_unstable();
    Ok(AccessPattern { seed: Some(seed), frame_len, slots })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignStrategy {
    /// Disjoint slot sets while the frame has room, then random patterns.
    OrthogonalFirst,
    Random,
}

/// Patterns the base station hands out once to each device.
pub fn assign_patterns(
    n_devices: usize,
    frame_len: usize,
    k_replicas: usize,
    strategy: AssignStrategy,
    seed: u64,
) -> Result<Vec<AccessPattern>> {
    if k_replicas == 0 || k_replicas > frame_len {
        return Err(Error::Usage(format!("{k_replicas} replicas do not fit in {frame_len} slots")));
    }
    let random = |i: usize| generate_access_pattern(derive_seed(seed, "pattern", i as u64), frame_len, k_replicas);
    match strategy {
        AssignStrategy::Random => (0..n_devices).map(random).collect(),
        AssignStrategy::OrthogonalFirst => {
            let mut perm: Vec<usize> = (0..frame_len).collect();
            perm.shuffle(&mut child_rng(seed, "orthogonal", 0));
            let blocks = frame_len / k_replicas;
            (0..n_devices)
                .map(|i| {
                    if i < blocks {
                        let mut slots = perm[i * k_replicas..(i + 1) * k_replicas].to_vec();
                        slots.sort_unstable();
                        Ok(AccessPattern { seed: None, frame_len, slots })
                    } else {
                        random(i)
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverModel {
    pub mpr_gamma: usize,
    pub sic_enabled: bool,
    pub combining_enabled: bool,
    pub per_replica_success: f64,
}

impl ReceiverModel {
    pub fn new(mpr_gamma: usize, sic_enabled: bool, combining_enabled: bool, per_replica_success: f64) -> Result<Self> {
        let r = ReceiverModel { mpr_gamma, sic_enabled, combining_enabled, per_replica_success };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mpr_gamma == 0 {
            return Err(Error::Usage("mpr_gamma must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.per_replica_success) {
            return Err(Error::Domain("per_replica_success must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Transmissions of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotGrid {
    pub frame_len: usize,
    pub slot_duration: f64,
    devices: Vec<(u32, Vec<usize>)>,
}

impl SlotGrid {
    pub fn new(frame_len: usize, slot_duration: f64) -> Self {
        SlotGrid { frame_len, slot_duration, devices: Vec::new() }
    }

    /// Adds a device transmitting one replica in each of `slots`.
    pub fn add_device(&mut self, device: u32, slots: &[usize]) -> Result<()> {
        if slots.is_empty() {
            return Err(Error::Usage(format!("device {device} has no replicas")));
        }
        let mut s = slots.to_vec();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Usage(format!("device {device} transmits twice in one slot")));
        }
        if s.last().is_some_and(|&l| l >= self.frame_len) {
            return Err(Error::Usage(format!("device {device} uses a slot outside the frame")));
        }
        self.devices.push((device, s));
        Ok(())
    }

    pub fn devices(&self) -> impl Iterator<Item = (u32, &[usize])> {
        self.devices.iter().map(|(d, s)| (*d, s.as_slice()))
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_transmissions(&self) -> usize {
        self.devices.iter().map(|(_, s)| s.len()).sum()
    }

    /// `(device index, replica index)` pairs per slot.
    pub fn occupancy(&self) -> Vec<Vec<(usize, usize)>> {
        let mut occ = vec![Vec::new(); self.frame_len];
        for (i, (_, slots)) in self.devices.iter().enumerate() {
            for (j, &s) in slots.iter().enumerate() {
                occ[s].push((i, j));
            }
        }
        occ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceOutcome {
    pub device: u32,
    /// Slot after which the packet became decodable.
    pub decoded_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    /// In the order devices were added to the grid.
    pub devices: Vec<DeviceOutcome>,
    /// Decoding rounds that produced at least one new packet.
    pub iterations: usize,
    /// Size of the decoded set after each such round.
    pub decoded_trace: Vec<usize>,
}

impl FrameOutcome {
    pub fn decoded(&self) -> usize {
        self.devices.iter().filter(|d| d.decoded_at.is_some()).count()
    }
}

/// Resolves one frame under MPR, optional SIC and optional combining.
pub fn resolve_frame(grid: &SlotGrid, receiver: &ReceiverModel, seed: u64) -> FrameOutcome {
    let n = grid.n_devices();
    let p = receiver.per_replica_success;
    let gamma = receiver.mpr_gamma;

    let mut rng = rng_from_seed(seed);
    let mut combine_draw = Vec::with_capacity(n);
    let mut replica_draw = Vec::with_capacity(n);
    for (_, slots) in grid.devices() {
        combine_draw.push(rng.random::<f64>());
        replica_draw.push((0..slots.len()).map(|_| rng.random::<f64>()).collect::<Vec<f64>>());
    }

    let occ = grid.occupancy();
    let mut remaining: Vec<usize> = occ.iter().map(Vec::len).collect();
    let mut clean: Vec<Vec<bool>> = grid.devices().map(|(_, s)| vec![false; s.len()]).collect();
    let mut clean_count = vec![0usize; n];
    let mut decoded_at: Vec<Option<usize>> = vec![None; n];
    let mut decoded_total = 0;
    let mut trace = Vec::new();

    for t in 0..grid.frame_len {
        let mut frontier = vec![t];
        while !frontier.is_empty() {
            frontier.sort_unstable();
            frontier.dedup();
            let mut newly = Vec::new();
            for &s in &frontier {
                if remaining[s] > gamma {
                    continue;
                }
                for &(i, j) in &occ[s] {
                    if decoded_at[i].is_some() || clean[i][j] {
                        continue;
                    }
                    clean[i][j] = true;
                    clean_count[i] += 1;
                    let ok = if receiver.combining_enabled {
                        combine_draw[i] < 1.0 - (1.0 - p).powi(clean_count[i] as i32)
                    } else {
                        replica_draw[i][j] < p
                    };
                    if ok {
                        decoded_at[i] = Some(t);
                        newly.push(i);
                    }
                }
            }
            frontier.clear();
            if newly.is_empty() {
                break;
            }
            decoded_total += newly.len();
            trace.push(decoded_total);
            if receiver.sic_enabled {
                for &i in &newly {
                    for &s in &grid.devices[i].1 {
                        remaining[s] -= 1;
                        if s <= t {
                            frontier.push(s);
                        }
                    }
                }
            }
        }
    }

    FrameOutcome {
        devices: grid
            .devices()
            .zip(decoded_at)
            .map(|((device, _), decoded_at)| DeviceOutcome { device, decoded_at })
            .collect(),
        iterations: trace.len(),
        decoded_trace: trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameStats {
    pub frame: u64,
    pub activated: usize,
    pub decoded: usize,
    pub dropped: usize,
    pub iterations: usize,
}

/// One row of the per-device CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub frame: u64,
    pub device: u32,
    pub activated: u8,
    pub decoded: u8,
    pub latency_slots: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessReport {
    pub cdf: LatencyCdf,
    pub frames: Vec<FrameStats>,
    /// Empty unless per-device records were requested.
    pub records: Vec<DeviceRecord>,
    pub frame_len: usize,
}

impl AccessReport {
    /// Decoded packets per slot.
    pub fn throughput(&self) -> f64 {
        let decoded: usize = self.frames.iter().map(|f| f.decoded).sum();
        decoded as f64 / (self.frames.len() * self.frame_len) as f64
    }

    pub fn activated(&self) -> usize {
        self.frames.iter().map(|f| f.activated).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrantFreeConfig {
    pub n_devices: usize,
    pub activation_prob: f64,
    pub k_replicas: usize,
    pub frame_len: usize,
    pub n_frames: u64,
    pub slot_duration: f64,
    pub receiver: ReceiverModel,
    #[serde(default)]
    pub record_devices: bool,
}

fn check_activation(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("activation_prob must lie in [0, 1], got {p}")))
    }
}

struct FrameResult {
    stats: FrameStats,
    samples: Vec<Latency>,
    records: Vec<DeviceRecord>,
}

fn frame_result(
    frame: u64,
    grid: &SlotGrid,
    active: &[bool],
    outcome: &FrameOutcome,
    record: bool,
) -> FrameResult {
    let mut samples = Vec::with_capacity(outcome.devices.len());
    for d in &outcome.devices {
        samples.push(match d.decoded_at {
            Some(t) => Latency::Delivered((t + 1) as f64 * grid.slot_duration),
            None => Latency::Dropped,
        });
    }
    let mut records = Vec::new();
    if record {
        let mut by_device = outcome.devices.iter().peekable();
        for (dev, &a) in active.iter().enumerate() {
            let mut rec = DeviceRecord { frame, device: dev as u32, activated: a as u8, decoded: 0, latency_slots: None };
            if by_device.peek().is_some_and(|o| o.device == dev as u32) {
                let o = by_device.next().unwrap();
                if let Some(t) = o.decoded_at {
                    rec.decoded = 1;
                    rec.latency_slots = Some(t as u64 + 1);
                }
            }
            records.push(rec);
        }
    }
    let decoded = outcome.decoded();
    FrameResult {
        stats: FrameStats {
            frame,
            activated: grid.n_devices(),
            decoded,
            dropped: grid.n_devices() - decoded,
            iterations: outcome.iterations,
        },
        samples,
        records,
    }
}

fn collect_report(results: Vec<FrameResult>, frame_len: usize) -> Result<AccessReport> {
    let mut frames = Vec::with_capacity(results.len());
    let mut records = Vec::new();
    let cdf = LatencyCdf::collect(results.iter().flat_map(|r| r.samples.iter().copied()))?;
    for r in results {
        frames.push(r.stats);
        records.extend(r.records);
    }
    Ok(AccessReport { cdf, frames, records, frame_len })
}

/// Random grant-free access: every frame, active devices draw fresh patterns.
pub fn run_grant_free(cfg: &GrantFreeConfig, seed: u64) -> Result<AccessReport> {
    check_activation(cfg.activation_prob)?;
    cfg.receiver.validate()?;
    if cfg.k_replicas == 0 || cfg.k_replicas > cfg.frame_len {
        return Err(Error::Usage(format!("{} replicas do not fit in {} slots", cfg.k_replicas, cfg.frame_len)));
    }
    if !(cfg.slot_duration > 0.0) {
        return Err(Error::Domain("slot_duration must be > 0".into()));
    }
    let results = (0..cfg.n_frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = child_rng(seed, "grant-free-frame", f);
            let mut grid = SlotGrid::new(cfg.frame_len, cfg.slot_duration);
            let mut active = vec![false; cfg.n_devices];
            for (dev, a) in active.iter_mut().enumerate() {
                if rng.random_bool(cfg.activation_prob) {
                    *a = true;
                    let pattern = generate_access_pattern(rng.random(), cfg.frame_len, cfg.k_replicas)?;
                    grid.add_device(dev as u32, &pattern.slots)?;
                }
            }
            let outcome = resolve_frame(&grid, &cfg.receiver, rng.random());
            Ok(frame_result(f, &grid, &active, &outcome, cfg.record_devices))
        })
        .collect::<Result<Vec<_>>>()?;
    collect_report(results, cfg.frame_len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinatedConfig {
    pub activation_prob: f64,
    pub frame_len: usize,
    pub n_frames: u64,
    pub slot_duration: f64,
    pub receiver: ReceiverModel,
    #[serde(default)]
    pub record_devices: bool,
}

/// Coordinated grant-free access: device `i` always uses `patterns[i]`.
pub fn run_coordinated(cfg: &CoordinatedConfig, patterns: &[AccessPattern], seed: u64) -> Result<AccessReport> {
    check_activation(cfg.activation_prob)?;
    cfg.receiver.validate()?;
    if !(cfg.slot_duration > 0.0) {
        return Err(Error::Domain("slot_duration must be > 0".into()));
    }
    if let Some(p) = patterns.iter().find(|p| p.slots.iter().any(|&s| s >= cfg.frame_len)) {
        return Err(Error::Usage(format!("pattern {:?} exceeds the frame", p.slots)));
    }
    let results = (0..cfg.n_frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = child_rng(seed, "coordinated-frame", f);
            let mut grid = SlotGrid::new(cfg.frame_len, cfg.slot_duration);
            let mut active = vec![false; patterns.len()];
            for (dev, pattern) in patterns.iter().enumerate() {
                if rng.random_bool(cfg.activation_prob) {
                    active[dev] = true;
                    grid.add_device(dev as u32, &pattern.slots)?;
                }
            }
            let outcome = resolve_frame(&grid, &cfg.receiver, rng.random());
            Ok(frame_result(f, &grid, &active, &outcome, cfg.record_devices))
        })
        .collect::<Result<Vec<_>>>()?;
    collect_report(results, cfg.frame_len)
}

const GRANT_BASED_CHUNK: u64 = 8192;

/// Request/grant/data/ack style exchanges without retries; any failed step drops the packet.
pub fn run_grant_based(
    chain: &ProtocolChain,
    round_trip_slots: &[u64],
    slot_duration: f64,
    n_trials: u64,
    seed: u64,
) -> Result<LatencyCdf> {
    if round_trip_slots.len() != chain.steps().len() {
        return Err(Error::Usage(format!(
            "{} step durations for {} protocol steps",
            round_trip_slots.len(),
            chain.steps().len()
        )));
    }
    if !(slot_duration > 0.0) {
        return Err(Error::Domain("slot_duration must be > 0".into()));
    }
    let total_slots: u64 = round_trip_slots.iter().sum();
    let chunks = n_trials.div_ceil(GRANT_BASED_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = GRANT_BASED_CHUNK.min(n_trials - c * GRANT_BASED_CHUNK);
            let mut rng = child_rng(seed, "grant-based", c);
            (0..n)
                .map(|_| {
                    for &p in chain.steps() {
                        if !(rng.random::<f64>() < p) {
                            return Latency::Dropped;
                        }
                    }
                    Latency::Delivered(total_slots as f64 * slot_duration)
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    LatencyCdf::collect(parts.into_iter().flatten())
}

/// One step of a request/response exchange that may be retried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeStep {
    /// Success probability of a single attempt.
    pub success: f64,
    pub duration_s: f64,
    /// Attempts before the packet is dropped; at least 1.
    pub max_attempts: u32,
}

/// Monte-Carlo latency of a sequence of retried steps. Each attempt costs
/// the step duration; a step that exhausts its attempts drops the packet.
/// The delivered mass is `prod(1 - (1 - p_i)^attempts_i)`.
pub fn run_exchange(steps: &[ExchangeStep], n_trials: u64, seed: u64) -> Result<LatencyCdf> {
    if steps.is_empty() {
        return Err(Error::Usage("exchange needs at least one step".into()));
    }
    for st in steps {
        if !(0.0..=1.0).contains(&st.success) {
            return Err(Error::Domain(format!("step success {} outside [0, 1]", st.success)));
        }
        if !(st.duration_s > 0.0) || st.max_attempts == 0 {
            return Err(Error::Domain("step duration must be > 0 and max_attempts >= 1".into()));
        }
    }
    let chunks = n_trials.div_ceil(GRANT_BASED_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = GRANT_BASED_CHUNK.min(n_trials - c * GRANT_BASED_CHUNK);
            let mut rng = child_rng(seed, "exchange", c);
            (0..n)
                .map(|_| {
                    let mut t = 0.0;
                    for st in steps {
                        let mut ok = false;
                        for _ in 0..st.max_attempts {
                            t += st.duration_s;
                            if rng.random::<f64>() < st.success {
                                ok = true;
                                break;
                            }
                        }
                        if !ok {
                            return Latency::Dropped;
                        }
                    }
                    Latency::Delivered(t)
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    LatencyCdf::collect(parts.into_iter().flatten())
}

/// Writes `frame,device,activated,decoded,latency_slots`.
pub fn write_device_csv<W: Write>(out: W, records: &[DeviceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
