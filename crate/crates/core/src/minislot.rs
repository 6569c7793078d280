//! Preemptive mini-slot scheduling of urgent downlink traffic over
//! background eMBB.
//!
//! Time is divided into 7-symbol slots whose first `control_prefix` symbols
//! carry control/pilots and are never preempted. All other symbols carry
//! eMBB data unless an urgent arrival claims them. An arrival of `size`
//! symbols is placed in the earliest run of `size` contiguous free
//! preemptable symbols that starts strictly after its arrival instant.
//! Runs never straddle a control prefix. Placements are not aligned to any
//! mini-slot grid.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reliability::{Latency, LatencyCdf};
use crate::seed::rng_from_seed;

pub const SYMBOLS_PER_SLOT: usize = 7;
pub const MAX_MINISLOT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioTimeline {
    pub n_slots: usize,
    pub control_prefix: usize,
    pub symbol_duration: f64,
}

impl RadioTimeline {
    pub fn new(n_slots: usize, control_prefix: usize, symbol_duration: f64) -> Result<Self> {
        let t = RadioTimeline { n_slots, control_prefix, symbol_duration };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_MINISLOT).contains(&self.control_prefix) {
            return Err(Error::Usage(format!("control_prefix must be 1..=6, got {}", self.control_prefix)));
        }
        if !(self.symbol_duration > 0.0 && self.symbol_duration.is_finite()) {
            return Err(Error::Domain("symbol_duration must be > 0".into()));
        }
        Ok(())
    }

    pub fn n_symbols(&self) -> usize {
        self.n_slots * SYMBOLS_PER_SLOT
    }

    pub fn is_control(&self, symbol: usize) -> bool {
        symbol % SYMBOLS_PER_SLOT < self.control_prefix
    }

    pub fn preemptable_symbols(&self) -> usize {
        self.n_slots * (SYMBOLS_PER_SLOT - self.control_prefix)
    }

    /// First symbol index whose start lies strictly after `t`.
    pub fn first_symbol_after(&self, t: f64) -> usize {
        (t / self.symbol_duration).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrllcArrival {
    pub arrival_time: f64,
    pub size_symbols: usize,
}

impl UrllcArrival {
    pub fn new(arrival_time: f64, size_symbols: usize) -> Result<Self> {
        if !(1..=MAX_MINISLOT).contains(&size_symbols) {
            return Err(Error::Usage(format!("mini-slot size must be 1..=6, got {size_symbols}")));
        }
        if !(arrival_time >= 0.0 && arrival_time.is_finite()) {
            return Err(Error::Domain("arrival time must be finite and >= 0".into()));
        }
        Ok(UrllcArrival { arrival_time, size_symbols })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub start_symbol: usize,
    pub size: usize,
}

impl Placement {
    pub fn end_symbol(&self) -> usize {
        self.start_symbol + self.size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    /// `None` marks an arrival that found no room before the horizon.
    pub placements: Vec<Option<Placement>>,
    pub latencies: Vec<Latency>,
    pub preempted_symbols: usize,
}

/// Earliest start of `size` free preemptable symbols at or after `from`.
#[allow(clippy::needless_range_loop)] // symbol index is also the control-map key
fn earliest_fit(timeline: &RadioTimeline, busy: &[bool], from: usize, size: usize) -> Option<usize> {
    let mut run = 0;
    for s in from..timeline.n_symbols() {
        if timeline.is_control(s) || busy[s] {
            run = 0;
            continue;
        }
        run += 1;
        if run == size {
            return Some(s + 1 - size);
        }
    }
    None
}

/// Places arrivals first come, first served.
pub fn schedule(timeline: &RadioTimeline, arrivals: &[UrllcArrival]) -> Result<ScheduleOutcome> {
    timeline.validate()?;
    if arrivals.windows(2).any(|w| w[1].arrival_time < w[0].arrival_time) {
        return Err(Error::Usage("arrivals must be sorted by time".into()));
    }
    let mut busy = vec![false; timeline.n_symbols()];
    let mut placements = Vec::with_capacity(arrivals.len());
    let mut latencies = Vec::with_capacity(arrivals.len());
    let mut preempted = 0;
    for a in arrivals {
        if !(1..=MAX_MINISLOT).contains(&a.size_symbols) {
            return Err(Error::Usage(format!("mini-slot size must be 1..=6, got {}", a.size_symbols)));
        }
        let from = timeline.first_symbol_after(a.arrival_time);
        match earliest_fit(timeline, &busy, from, a.size_symbols) {
            Some(start) => {
                let p = Placement { start_symbol: start, size: a.size_symbols };
                busy[start..p.end_symbol()].iter_mut().for_each(|b| *b = true);
                preempted += a.size_symbols;
                let done = p.end_symbol() as f64 * timeline.symbol_duration;
                latencies.push(Latency::Delivered(done - a.arrival_time));
                placements.push(Some(p));
            }
            None => {
                latencies.push(Latency::Dropped);
                placements.push(None);
            }
        }
    }
    Ok(ScheduleOutcome { placements, latencies, preempted_symbols: preempted })
}

/// Checks that no placement touches a control symbol, overlaps another
/// placement, leaves the timeline or starts before its arrival.
#[allow(clippy::needless_range_loop)]
pub fn verify_placements(timeline: &RadioTimeline, arrivals: &[UrllcArrival], outcome: &ScheduleOutcome) -> Result<()> {
    let mut owner: Vec<Option<usize>> = vec![None; timeline.n_symbols()];
    for (i, (a, p)) in arrivals.iter().zip(&outcome.placements).enumerate() {
        let Some(p) = p else { continue };
        if p.end_symbol() > timeline.n_symbols() {
            return Err(Error::Usage(format!("arrival {i} placed beyond the horizon")));
        }
        if (p.start_symbol as f64) * timeline.symbol_duration <= a.arrival_time {
            return Err(Error::Usage(format!("arrival {i} starts before it arrived")));
        }
        for s in p.start_symbol..p.end_symbol() {
            if timeline.is_control(s) {
                return Err(Error::Usage(format!("arrival {i} preempts control symbol {s}")));
            }
            if let Some(j) = owner[s] {
                return Err(Error::Usage(format!("arrivals {j} and {i} overlap at symbol {s}")));
            }
            owner[s] = Some(i);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinislotLoad {
    /// Poisson arrival rate, per second.
    pub rate: f64,
    /// Relative frequency of mini-slot sizes 1..=6.
    pub size_weights: [f64; MAX_MINISLOT],
    pub timeline: RadioTimeline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinislotReport {
    pub arrivals: Vec<UrllcArrival>,
    pub outcome: ScheduleOutcome,
    pub cdf: LatencyCdf,
    /// Preempted eMBB symbols over all preemptable symbols.
    pub embb_loss_fraction: f64,
}

/// Poisson arrivals over the horizon (the last slot is kept free of new
/// arrivals so tail packets still have room), scheduled earliest-fit.
pub fn urllc_latency_cdf(load: &MinislotLoad, seed: u64) -> Result<MinislotReport> {
    let tl = &load.timeline;
    tl.validate()?;
    if !(load.rate >= 0.0 && load.rate.is_finite()) {
        return Err(Error::Domain("arrival rate must be finite and >= 0".into()));
    }
    let mut arrivals = Vec::new();
    if load.rate > 0.0 {
        let mut rng = rng_from_seed(seed);
        let sizes = WeightedIndex::new(load.size_weights)
            .map_err(|e| Error::Usage(format!("size weights: {e}")))?;
        let gap = Exp::new(load.rate).map_err(|e| Error::Domain(e.to_string()))?;
        let end = tl.n_slots.saturating_sub(1) as f64 * SYMBOLS_PER_SLOT as f64 * tl.symbol_duration;
        let mut t = gap.sample(&mut rng);
        while t < end {
            arrivals.push(UrllcArrival { arrival_time: t, size_symbols: sizes.sample(&mut rng) + 1 });
            t += gap.sample(&mut rng);
        }
    }
    let outcome = schedule(tl, &arrivals)?;
    let cdf = LatencyCdf::collect(outcome.latencies.iter().copied())?;
    let embb_loss_fraction = if tl.preemptable_symbols() == 0 {
        0.0
    } else {
        outcome.preempted_symbols as f64 / tl.preemptable_symbols() as f64
    };
    Ok(MinislotReport { arrivals, outcome, cdf, embb_loss_fraction })
}

#[derive(Serialize)]
struct MinislotRow {
    arrival_time_s: f64,
    size_symbols: usize,
    latency_s: Option<f64>,
    dropped: u8,
}

/// Writes `arrival_time_s,size_symbols,latency_s,dropped` per arrival and a
/// closing `embb_loss_fraction,<value>,,` summary row.
pub fn write_minislot_csv<W: Write>(out: W, report: &MinislotReport) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["arrival_time_s", "size_symbols", "latency_s", "dropped"])?;
    for (a, l) in report.arrivals.iter().zip(&report.outcome.latencies) {
        let (latency_s, dropped) = match l {
            Latency::Delivered(t) => (Some(*t), 0),
            Latency::Dropped => (None, 1),
        };
        w.serialize(MinislotRow { arrival_time_s: a.arrival_time, size_symbols: a.size_symbols, latency_s, dropped })?;
    }
    w.serialize(("embb_loss_fraction", report.embb_loss_fraction, "", ""))?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tl(n_slots: usize, cp: usize) -> RadioTimeline {
        RadioTimeline::new(n_slots, cp, 1.0).unwrap()
    }

    fn arr(t: f64, size: usize) -> UrllcArrival {
        UrllcArrival::new(t, size).unwrap()
    }

    fn delivered(l: Latency) -> f64 {
        match l {
            Latency::Delivered(t) => t,
            Latency::Dropped => panic!("dropped"),
        }
    }

    #[test]
    fn single_symbol_just_before_a_free_symbol() {
        let out = schedule(&tl(2, 1), &[arr(1.75, 1)]).unwrap();
        assert_eq!(out.placements[0], Some(Placement { start_symbol: 2, size: 1 }));
        assert!((delivered(out.latencies[0]) - (0.25 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn arrival_during_control_waits_for_it() {
        // symbol 7 is control for slot 1 with prefix 2; symbols 7, 8 are control
        let out = schedule(&tl(2, 2), &[arr(6.5, 1)]).unwrap();
        assert_eq!(out.placements[0].unwrap().start_symbol, 9);
    }

    #[test]
    fn second_full_minislot_spills_to_next_slot() {
        let out = schedule(&tl(3, 1), &[arr(0.0, 6), arr(0.0, 6)]).unwrap();
        assert_eq!(out.placements[0].unwrap().start_symbol, 1);
        assert_eq!(out.placements[1].unwrap().start_symbol, 8);
        assert_eq!(out.preempted_symbols, 12);
    }

    #[test]
    fn arrival_after_horizon_room_is_dropped() {
        let out = schedule(&tl(1, 1), &[arr(0.0, 6), arr(0.5, 1)]).unwrap();
        assert_eq!(out.latencies[1], Latency::Dropped);
        assert_eq!(out.preempted_symbols, 6);
    }

    #[test]
    fn invalid_inputs() {
        assert!(RadioTimeline::new(1, 0, 1.0).is_err());
        assert!(RadioTimeline::new(1, 7, 1.0).is_err());
        assert!(UrllcArrival::new(0.0, 7).is_err());
        assert!(schedule(&tl(2, 1), &[arr(3.0, 1), arr(1.0, 1)]).is_err());
    }

    #[test]
    fn zero_rate_is_empty() {
        let load = MinislotLoad { rate: 0.0, size_weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], timeline: tl(10, 1) };
        let r = urllc_latency_cdf(&load, 1).unwrap();
        assert!(r.cdf.is_empty());
        assert_eq!(r.embb_loss_fraction, 0.0);
    }

    #[test]
    fn placements_verify_and_conserve_symbols() {
        let load = MinislotLoad { rate: 0.4, size_weights: [1.0; 6], timeline: tl(500, 2) };
        let r = urllc_latency_cdf(&load, 7).unwrap();
        verify_placements(&load.timeline, &r.arrivals, &r.outcome).unwrap();
        let placed: usize = r.outcome.placements.iter().flatten().map(|p| p.size).sum();
        assert_eq!(r.embb_loss_fraction, placed as f64 / load.timeline.preemptable_symbols() as f64);
    }

    #[test]
    fn csv_has_summary_row() {
        let load = MinislotLoad { rate: 0.1, size_weights: [1.0; 6], timeline: tl(20, 1) };
        let r = urllc_latency_cdf(&load, 3).unwrap();
        let mut buf = Vec::new();
        write_minislot_csv(&mut buf, &r).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("arrival_time_s,size_symbols,latency_s,dropped\n"));
        assert!(s.trim_end().lines().last().unwrap().starts_with("embb_loss_fraction,"));
        assert_eq!(s.lines().count(), r.arrivals.len() + 2);
    }
}
