//! Interface diversity through packet duplication.
//!
//! Every packet is sent over each interface of a configuration; its latency
//! is that of the first copy to arrive, and it is lost only when every copy
//! is lost. Interfaces are described by latency traces sampled on a common
//! send-time grid.
//!
//! Trace CSV: header `send_time_s,latency_ms`, send times strictly
//! increasing, latency `-1` for a lost packet.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reliability::{Latency, LatencyCdf, ReliabilityPoint};
use crate::seed::rng_from_seed;

/// Latency sentinel for a lost packet in trace files.
pub const LOSS_SENTINEL_MS: f64 = -1.0;

/// Default window for nearest-neighbour matching of unaligned traces.
pub const DEFAULT_ALIGN_TOLERANCE_S: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub send_time: f64,
    /// Seconds; `None` when the packet was lost.
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub name: String,
    pub events: Vec<TraceEvent>,
}

impl InterfaceTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn samples(&self) -> Vec<Latency> {
        self.events.iter().map(|e| to_latency(e.latency)).collect()
    }
}

fn to_latency(l: Option<f64>) -> Latency {
    match l {
        Some(t) => Latency::Delivered(t),
        None => Latency::Dropped,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    send_time_s: f64,
    latency_ms: f64,
}

/// Loads a trace file; the interface is named after the file stem.
pub fn load_trace(path: &Path) -> Result<InterfaceTrace> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    load_trace_from(File::open(path)?, &name)
}

pub fn load_trace_from<R: Read>(input: R, name: &str) -> Result<InterfaceTrace> {
    let err = |line: u64, message: String| Error::TraceLoad { source_name: name.to_string(), line, message };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["send_time_s", "latency_ms"] {
        return Err(err(1, format!("expected header send_time_s,latency_ms, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut events: Vec<TraceEvent> = Vec::new();
    for rec in rdr.deserialize::<TraceRow>() {
        let row = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = events.len() as u64 + 2;
        if !row.send_time_s.is_finite() {
            return Err(err(line, "send time is not finite".into()));
        }
        let latency = if row.latency_ms == LOSS_SENTINEL_MS {
            None
        } else if row.latency_ms > 0.0 && row.latency_ms.is_finite() {
            Some(row.latency_ms / 1e3)
        } else {
            return Err(err(line, format!("latency must be > 0 or -1 for loss, got {}", row.latency_ms)));
        };
        if let Some(prev) = events.last() {
            if row.send_time_s <= prev.send_time {
                return Err(err(line, format!("send time {} does not increase", row.send_time_s)));
            }
        }
        events.push(TraceEvent { send_time: row.send_time_s, latency });
    }
    Ok(InterfaceTrace { name: name.to_string(), events })
}

pub fn write_trace_csv<W: Write>(out: W, trace: &InterfaceTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in &trace.events {
        w.serialize(TraceRow {
            send_time_s: e.send_time,
            latency_ms: e.latency.map_or(LOSS_SENTINEL_MS, |t| t * 1e3),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Lognormal body plus a Pareto spike component, with independent losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceModel {
    pub base_median_ms: f64,
    pub base_sigma: f64,
    pub spike_weight: f64,
    pub spike_scale_ms: f64,
    pub spike_shape: f64,
    pub loss_prob: f64,
}

impl TraceModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(m.to_string()));
        if !(self.base_median_ms > 0.0) {
            return bad("base_median_ms must be > 0");
        }
        if !(self.base_sigma >= 0.0) {
            return bad("base_sigma must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.spike_weight) || !(0.0..=1.0).contains(&self.loss_prob) {
            return bad("spike_weight and loss_prob must lie in [0, 1]");
        }
        if !(self.spike_scale_ms > 0.0 && self.spike_shape > 0.0) {
            return bad("spike_scale_ms and spike_shape must be > 0");
        }
        Ok(())
    }
}

/// Seeded synthetic trace on the grid `i / rate_hz`, `i < duration_s * rate_hz`.
pub fn synth_trace(name: &str, model: &TraceModel, duration_s: f64, rate_hz: f64, seed: u64) -> Result<InterfaceTrace> {
    model.validate()?;
    if !(duration_s > 0.0 && rate_hz > 0.0) {
        return Err(Error::Domain("duration and rate must be > 0".into()));
    }
    let base = LogNormal::new(model.base_median_ms.ln(), model.base_sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let spike = Pareto::new(model.spike_scale_ms, model.spike_shape).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let n = (duration_s * rate_hz).floor() as u64;
    let events = (0..n)
        .map(|i| {
            let lost = rng.random::<f64>() < model.loss_prob;
            let from_spike = rng.random::<f64>() < model.spike_weight;
            let ms = if from_spike { spike.sample(&mut rng) } else { base.sample(&mut rng) };
            TraceEvent { send_time: i as f64 / rate_hz, latency: if lost { None } else { Some(ms / 1e3) } }
        })
        .collect();
    Ok(InterfaceTrace { name: name.to_string(), events })
}

/// Traces joined on one send-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTraces {
    pub names: Vec<String>,
    pub send_times: Vec<f64>,
    /// `latencies[interface][row]`
    pub latencies: Vec<Vec<Option<f64>>>,
    /// Reference events discarded because some trace had no event within tolerance.
    pub unmatched: usize,
}

/// Joins traces on the send-time grid of the first one. Identical grids are
/// used as-is; otherwise each trace contributes its nearest event within
/// `tolerance_s`, and reference events without a match everywhere are dropped.
pub fn align(traces: &[InterfaceTrace], tolerance_s: f64) -> Result<AlignedTraces> {
    let Some(reference) = traces.first() else {
        return Err(Error::Usage("no traces to align".into()));
    };
    let names = traces.iter().map(|t| t.name.clone()).collect();
    let same_grid = traces.iter().all(|t| {
        t.events.len() == reference.events.len()
            && t.events.iter().zip(&reference.events).all(|(a, b)| a.send_time == b.send_time)
    });
    if same_grid {
        return Ok(AlignedTraces {
            names,
            send_times: reference.events.iter().map(|e| e.send_time).collect(),
            latencies: traces.iter().map(|t| t.events.iter().map(|e| e.latency).collect()).collect(),
            unmatched: 0,
        });
    }

    let nearest = |t: &InterfaceTrace, at: f64| -> Option<Option<f64>> {
        let idx = t.events.partition_point(|e| e.send_time < at);
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter_map(|i| t.events.get(i))
            .filter(|e| (e.send_time - at).abs() <= tolerance_s)
            .min_by(|a, b| (a.send_time - at).abs().total_cmp(&(b.send_time - at).abs()))
            .map(|e| e.latency)
    };

    let mut send_times = Vec::new();
    let mut latencies = vec![Vec::new(); traces.len()];
    let mut unmatched = 0;
    for ev in &reference.events {
        let row: Option<Vec<Option<f64>>> = traces.iter().map(|t| nearest(t, ev.send_time)).collect();
        match row {
            Some(row) => {
                send_times.push(ev.send_time);
                for (col, l) in latencies.iter_mut().zip(row) {
                    col.push(l);
                }
            }
            None => unmatched += 1,
        }
    }
    if unmatched > 0 {
        log::warn!("dropped {unmatched} reference events without a match within {tolerance_s} s");
    }
    Ok(AlignedTraces { names, send_times, latencies, unmatched })
}

/// A named set of interfaces a packet is duplicated over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdConfig {
    pub name: String,
    pub interfaces: Vec<String>,
}

/// First-arrival latency per send time; dropped only if every selected copy was lost.
pub fn pd_latency(aligned: &AlignedTraces, config: &PdConfig) -> Result<Vec<Latency>> {
    if config.interfaces.is_empty() {
        return Err(Error::Usage(format!("configuration {} selects no interface", config.name)));
    }
    let cols = config
        .interfaces
        .iter()
        .map(|n| {
            aligned
                .names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| Error::Usage(format!("configuration {} names unknown interface {n}", config.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..aligned.send_times.len())
        .map(|row| {
            let first = cols
                .iter()
                .filter_map(|&c| aligned.latencies[c][row])
                .min_by(f64::total_cmp);
            to_latency(first)
        })
        .collect())
}

/// Reliability of the samples at each latency of `grid`.
pub fn reliability_curve(samples: &[Latency], grid: &[f64]) -> Result<Vec<ReliabilityPoint>> {
    Ok(LatencyCdf::from_samples(samples)?.points(grid))
}

#[derive(Serialize)]
struct PdRow<'a> {
    config: &'a str,
    deadline_s: f64,
    reliability: f64,
    n_samples: u64,
    n_drops: u64,
}

/// Reliability CSV with a leading `config` column, one block of rows per configuration.
pub fn write_pd_csv<W: Write>(out: W, curves: &[(String, Vec<ReliabilityPoint>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (name, points) in curves {
        for p in points {
            w.serialize(PdRow {
                config: name,
                deadline_s: p.deadline_s,
                reliability: p.reliability,
                n_samples: p.n_samples,
                n_drops: p.n_drops,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
