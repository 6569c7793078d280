//! Latency distributions with explicit drop mass, reliability at a deadline,
//! and composition of per-stage success probabilities.
//!
//! A dropped packet has infinite latency. It is counted in the sample total
//! but never meets any deadline, so `reliability_at(inf) = 1 - P_e`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{wilson_interval, Z95};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Success probabilities of the auxiliary procedures, metadata and data of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageModel {
    pub p_aux: f64,
    pub p_meta: f64,
    pub p_data: f64,
}

impl StageModel {
    pub fn new(p_aux: f64, p_meta: f64, p_data: f64) -> Result<Self> {
        check_prob("p_aux", p_aux)?;
        check_prob("p_meta", p_meta)?;
        check_prob("p_data", p_data)?;
        Ok(StageModel { p_aux, p_meta, p_data })
    }
}

/// A packet succeeds only if detection/estimation, metadata and data all succeed.
pub fn packet_success(stages: &StageModel) -> f64 {
    rounded_product([stages.p_aux, stages.p_meta, stages.p_data])
}

/// Ordered packet exchange; every step must succeed for the exchange to succeed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolChain {
    steps: Vec<f64>,
}

impl ProtocolChain {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Usage("protocol chain needs at least one step".into()));
        }
        for (i, &p) in steps.iter().enumerate() {
            check_prob(&format!("step {i}"), p)?;
        }
        Ok(ProtocolChain { steps })
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Appends one more exchange step.
    pub fn then(mut self, p: f64) -> Result<Self> {
        check_prob("step", p)?;
        self.steps.push(p);
        Ok(self)
    }
}

pub fn chain_success(chain: &ProtocolChain) -> f64 {
    rounded_product(chain.steps.iter().copied())
}

/// Product of the exact binary values, rounded once at the end.
///
/// Carries a double-double accumulator (error-free fma products), so a chain of
/// 0.99 steps lands on the decimal the reader expects instead of drifting by one ulp
/// per multiplication. Relative accumulator error stays near 2^-104 for short chains.
pub fn rounded_product<I: IntoIterator<Item = f64>>(factors: I) -> f64 {
    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    for x in factors {
        let p = hi * x;
        let e = hi.mul_add(x, -p);
        let l = lo.mul_add(x, e);
        // fast two-sum; |p| dominates |l| for probabilities
        let s = p + l;
        lo = l - (s - p);
        hi = s;
    }
    hi + lo
}

/// Outcome of a single packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Latency {
    Delivered(f64),
    Dropped,
}

/// Empirical latency distribution with an explicit count of dropped packets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyCdf {
    sorted: Vec<f64>,
    drops: u64,
}

impl LatencyCdf {
    /// A distribution with no samples at all.
    pub fn empty() -> Self {
        LatencyCdf::default()
    }

    /// Builds the distribution; rejects an empty sample list and negative or
    /// non-finite latencies.
    pub fn from_samples(samples: &[Latency]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Usage("latency sample list is empty".into()));
        }
        Self::collect(samples.iter().copied())
    }

    /// Like [`LatencyCdf::from_samples`] but an empty iterator yields [`LatencyCdf::empty`].
    pub fn collect(samples: impl IntoIterator<Item = Latency>) -> Result<Self> {
        let mut sorted = Vec::new();
        let mut drops = 0;
        for s in samples {
            match s {
                Latency::Delivered(t) if t.is_finite() && t >= 0.0 => sorted.push(t),
                Latency::Delivered(t) => {
                    return Err(Error::Domain(format!("latency must be finite and >= 0, got {t}")))
                }
                Latency::Dropped => drops += 1,
            }
        }
        sorted.sort_by(f64::total_cmp);
        Ok(LatencyCdf { sorted, drops })
    }

    pub fn total(&self) -> u64 {
        self.sorted.len() as u64 + self.drops
    }

    pub fn drop_count(&self) -> u64 {
        self.drops
    }

    pub fn delivered(&self) -> &[f64] {
        &self.sorted
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Number of packets delivered within `deadline` (inclusive).
    pub fn delivered_within(&self, deadline: f64) -> u64 {
        if deadline == f64::INFINITY {
            return self.sorted.len() as u64;
        }
        self.sorted.partition_point(|&t| t <= deadline) as u64
    }

    /// Fraction of all packets delivered within `deadline`. NaN when there are no samples.
    pub fn reliability_at(&self, deadline: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return f64::NAN;
        }
        self.delivered_within(deadline) as f64 / total as f64
    }

    /// Wilson 95% interval around [`LatencyCdf::reliability_at`].
    pub fn reliability_interval(&self, deadline: f64) -> (f64, f64) {
        wilson_interval(self.delivered_within(deadline), self.total(), Z95)
    }

    /// Empirical drop probability `P_e`.
    pub fn drop_probability(&self) -> f64 {
        self.drops as f64 / self.total() as f64
    }

    /// Smallest observed latency `t` with `reliability_at(t) >= target`, or
    /// `None` when drops keep the distribution below the target.
    pub fn latency_at_reliability(&self, target: f64) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let needed = (target * total as f64).ceil().max(1.0) as usize;
        self.sorted.get(needed - 1).copied()
    }

    pub fn merge(&self, other: &LatencyCdf) -> LatencyCdf {
        let mut sorted = Vec::with_capacity(self.sorted.len() + other.sorted.len());
        let (mut i, mut j) = (0, 0);
        while i < self.sorted.len() && j < other.sorted.len() {
            if self.sorted[i] <= other.sorted[j] {
                sorted.push(self.sorted[i]);
                i += 1;
            } else {
                sorted.push(other.sorted[j]);
                j += 1;
            }
        }
        sorted.extend_from_slice(&self.sorted[i..]);
        sorted.extend_from_slice(&other.sorted[j..]);
        LatencyCdf { sorted, drops: self.drops + other.drops }
    }

    pub fn points(&self, deadlines: &[f64]) -> Vec<ReliabilityPoint> {
        deadlines
            .iter()
            .map(|&d| ReliabilityPoint {
                deadline_s: d,
                reliability: self.reliability_at(d),
                n_samples: self.total(),
                n_drops: self.drops,
            })
            .collect()
    }
}

/// One row of the reliability CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPoint {
    pub deadline_s: f64,
    pub reliability: f64,
    pub n_samples: u64,
    pub n_drops: u64,
}

/// Writes `deadline_s,reliability,n_samples,n_drops`, one row per deadline.
pub fn write_reliability_csv<W: Write>(out: W, cdf: &LatencyCdf, deadlines: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in cdf.points(deadlines) {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && points >= 1);
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == points - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Latency::{Delivered as D, Dropped};

    #[test]
    fn rounded_product_matches_rational_oracle() {
        // frozen from exact rational products of the binary inputs
        let cases: [(&[f64], f64); 5] = [
            (&[0.99; 3], 0.970299),
            (&[0.9, 0.95, 0.999], 0.8541449999999999),
            (&[0.1; 5], 1.0000000000000003e-05),
            (&[0.7, 0.3, 0.123456], 0.025925759999999996),
            (&[0.99; 10], 0.9043820750088044),
        ];
        for (xs, want) in cases {
            assert_eq!(rounded_product(xs.iter().copied()), want, "{xs:?}");
        }
        assert_eq!(rounded_product([0.999999; 20]), 0.9999800001899983);
        assert_eq!(rounded_product([0.5, 0.0, 0.3]), 0.0);
        assert_eq!(rounded_product(std::iter::empty()), 1.0);
    }

    #[test]
    fn packet_success_examples() {
        assert_eq!(packet_success(&StageModel::new(1.0, 1.0, 1.0).unwrap()), 1.0);
        let p = packet_success(&StageModel::new(0.99, 0.99, 0.99).unwrap());
        assert_eq!(p, 0.970299);
        assert_eq!(packet_success(&StageModel::new(1.0, 0.0, 1.0).unwrap()), 0.0);
        assert!(StageModel::new(1.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn chain_examples() {
        let c = ProtocolChain::new(vec![0.999]).unwrap();
        assert_eq!(chain_success(&c), 0.999);
        let c = ProtocolChain::new(vec![0.999; 3]).unwrap();
        assert!((chain_success(&c) - 0.997_002_999).abs() < 1e-15);
        let before = chain_success(&c);
        let c = c.then(0.9).unwrap();
        assert!((chain_success(&c) - 0.9 * before).abs() < 1e-15);
        assert!(ProtocolChain::new(vec![]).is_err());
    }

    #[test]
    fn cdf_counting_examples() {
        let cdf = LatencyCdf::from_samples(&[D(1e-3), D(2e-3), Dropped]).unwrap();
        assert_eq!(cdf.reliability_at(2e-3), 2.0 / 3.0);
        assert_eq!(cdf.reliability_at(f64::INFINITY), 2.0 / 3.0);

        let all_drop = LatencyCdf::from_samples(&[Dropped, Dropped]).unwrap();
        for d in [0.0, 1.0, f64::INFINITY] {
            assert_eq!(all_drop.reliability_at(d), 0.0);
        }

        let no_drop = LatencyCdf::from_samples(&[D(3.0), D(1.0)]).unwrap();
        assert_eq!(no_drop.reliability_at(3.0), 1.0);

        let cdf = LatencyCdf::from_samples(&[D(1.0), D(2.0), D(3.0), Dropped]).unwrap();
        assert_eq!(cdf.reliability_at(2.0), 0.5);
        assert_eq!(cdf.reliability_at(0.5), 0.0);
        assert_eq!(cdf.reliability_at(f64::INFINITY), 1.0 - cdf.drop_probability());
    }

    #[test]
    fn empty_input_is_a_usage_error() {
        assert!(matches!(LatencyCdf::from_samples(&[]), Err(Error::Usage(_))));
        assert!(LatencyCdf::from_samples(&[D(-1.0)]).is_err());
        assert!(LatencyCdf::collect(std::iter::empty()).unwrap().is_empty());
    }

    #[test]
    fn latency_quantile() {
        let cdf = LatencyCdf::from_samples(&[D(1.0), D(2.0), D(3.0), Dropped]).unwrap();
        assert_eq!(cdf.latency_at_reliability(0.5), Some(2.0));
        assert_eq!(cdf.latency_at_reliability(0.75), Some(3.0));
        assert_eq!(cdf.latency_at_reliability(0.8), None);
    }

    #[test]
    fn csv_layout() {
        let cdf = LatencyCdf::from_samples(&[D(1.0), Dropped]).unwrap();
        let mut buf = Vec::new();
        write_reliability_csv(&mut buf, &cdf, &[0.5, 1.0]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "deadline_s,reliability,n_samples,n_drops\n0.5,0.0,2,1\n1.0,0.5,2,1\n");
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1.0, 4);
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[3], 1.0);
        assert!((g[1] - 1e-2).abs() < 1e-15);
    }
}
