//! Finite-blocklength coding rates over the complex AWGN channel.
//!
//! All rates are in bits per channel use. Capacity is `log2(1 + snr)`; users
//! of a real-valued channel model should halve rates and dispersions.
//! The maximal rate uses the normal approximation
//! `R*(n, eps) = C - sqrt(V / n) Qinv(eps) + log2(n) / (2n)`, floored at zero.

use std::f64::consts::LOG2_E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{q_func, q_inv};

/// Linear signal-to-noise power ratio, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LinkSnr(f64);

impl LinkSnr {
    pub fn new(snr: f64) -> Result<Self> {
        if snr > 0.0 && snr.is_finite() {
            Ok(LinkSnr(snr))
        } else {
            Err(Error::Domain(format!("snr must be finite and > 0, got {snr}")))
        }
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(10f64.powf(db / 10.0))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

impl TryFrom<f64> for LinkSnr {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        LinkSnr::new(v)
    }
}

impl From<LinkSnr> for f64 {
    fn from(s: LinkSnr) -> f64 {
        s.0
    }
}

/// Blocklength, payload and target error probability of a single codeword.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub n: u64,
    pub k_bits: u64,
    pub epsilon: f64,
}

impl CodeSpec {
    pub fn new(n: u64, k_bits: u64, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("blocklength must be >= 1".into()));
        }
        if k_bits == 0 {
            return Err(Error::Domain("payload must be >= 1 bit".into()));
        }
        check_epsilon(epsilon)?;
        Ok(CodeSpec { n, k_bits, epsilon })
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("error probability must lie in (0, 1), got {epsilon}")))
    }
}

/// `log2(1 + snr)`.
pub fn awgn_capacity(snr: LinkSnr) -> f64 {
    snr.0.ln_1p() * LOG2_E
}

/// Channel dispersion `snr (snr + 2) / (snr + 1)^2 * (log2 e)^2`.
pub fn awgn_dispersion(snr: LinkSnr) -> f64 {
    let s = snr.0;
    let frac = s * (s + 2.0) / ((s + 1.0) * (s + 1.0));
    frac * LOG2_E * LOG2_E
}

/// `n R*(n, eps)` before flooring; the total number of bits an `n`-use block carries.
fn bits_unfloored(n: f64, backoff: f64, capacity: f64) -> f64 {
    n * capacity - backoff * n.sqrt() + 0.5 * n.log2()
}

/// Normal-approximation maximal coding rate, floored at zero.
pub fn max_coding_rate(n: u64, epsilon: f64, snr: LinkSnr) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("blocklength must be >= 1".into()));
    }
    check_epsilon(epsilon)?;
    let nf = n as f64;
    let capacity = awgn_capacity(snr);
    let r = capacity - (awgn_dispersion(snr) / nf).sqrt() * q_inv(epsilon) + nf.log2() / (2.0 * nf);
    Ok(r.max(0.0))
}

/// Smallest blocklength whose normal-approximation payload reaches `k_bits`.
///
/// `f(n) = n C - b sqrt(n) + log2(n)/2` with `b = sqrt(V) Qinv(eps)` is
/// increasing, then possibly decreasing, then increasing again (its
/// derivative is a quadratic in `1/sqrt(n)`). The search handles the
/// first rising segment separately and bisects each monotone piece.
pub fn min_blocklength(k_bits: u64, epsilon: f64, snr: LinkSnr) -> Result<u64> {
    if k_bits == 0 {
        return Err(Error::Domain("payload must be >= 1 bit".into()));
    }
    check_epsilon(epsilon)?;
    let capacity = awgn_capacity(snr);
    let backoff = awgn_dispersion(snr).sqrt() * q_inv(epsilon);
    let k = k_bits as f64;
    let f = |n: u64| bits_unfloored(n as f64, backoff, capacity).max(0.0);

    // d f / dn = C - (b/2) t + c t^2 with t = 1/sqrt(n), c = log2(e)/2
    let c = 0.5 * LOG2_E;
    let disc = backoff * backoff / 4.0 - 4.0 * c * capacity;
    let mut rise_from = 1u64;
    if backoff > 0.0 && disc > 0.0 {
        let t_hi = (backoff / 2.0 + disc.sqrt()) / (2.0 * c);
        let t_lo = (backoff / 2.0 - disc.sqrt()) / (2.0 * c);
        // f increases on [1, 1/t_hi^2] and again from 1/t_lo^2
        let first_peak = (1.0 / (t_hi * t_hi)).floor().max(1.0) as u64;
        let second_rise = if t_lo > 0.0 { (1.0 / (t_lo * t_lo)).ceil() as u64 } else { 1 };
        if first_peak >= 1 && f(first_peak) >= k {
            return Ok(bisect(&f, k, 1, first_peak));
        }
        // one step past the continuous peak can still be the highest integer point
        let beyond = first_peak + 1;
        if beyond < second_rise && f(beyond) >= k {
            return Ok(beyond);
        }
        rise_from = second_rise.max(1);
    }

    if f(rise_from) >= k {
        return Ok(rise_from);
    }
    let mut lo = rise_from;
    let mut hi = rise_from.max(1) * 2;
    while f(hi) < k {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::Domain("blocklength overflow".into()))?;
    }
    Ok(bisect(&f, k, lo, hi))
}

/// Smallest `n` in `(lo, hi]` with `f(n) >= k`, given `f` non-decreasing on
/// `[lo, hi]` and `f(hi) >= k`. If `f(lo) >= k` returns `lo`.
fn bisect(f: &impl Fn(u64) -> f64, k: f64, mut lo: u64, mut hi: u64) -> u64 {
    if f(lo) >= k {
        return lo;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Error probability that makes an `n`-use block carry exactly `k_bits`,
/// clamped to the open unit interval.
pub fn error_prob(n: u64, k_bits: u64, snr: LinkSnr) -> Result<f64> {
    if n == 0 || k_bits == 0 {
        return Err(Error::Domain("blocklength and payload must be >= 1".into()));
    }
    let nf = n as f64;
    let arg = (awgn_capacity(snr) - k_bits as f64 / nf + nf.log2() / (2.0 * nf))
        * (nf / awgn_dispersion(snr)).sqrt();
    let eps = q_func(arg);
    Ok(eps.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snr(x: f64) -> LinkSnr {
        LinkSnr::new(x).unwrap()
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(awgn_capacity(snr(1.0)), 1.0);
        assert!((awgn_capacity(snr(3.0)) - 2.0).abs() < 1e-15);
        assert!(awgn_capacity(snr(1e-12)) < 1e-11);
    }

    #[test]
    fn dispersion_examples() {
        let l2e2 = LOG2_E * LOG2_E;
        assert!((awgn_dispersion(snr(1.0)) - 0.75 * l2e2).abs() < 1e-15);
        assert!(awgn_dispersion(snr(1e-12)) < 1e-11);
        assert!((awgn_dispersion(snr(1e9)) - l2e2).abs() < 1e-9);
        assert!((l2e2 - 2.0814).abs() < 1e-4);
    }

    #[test]
    fn non_positive_snr_is_a_domain_error() {
        assert!(matches!(LinkSnr::new(0.0), Err(Error::Domain(_))));
        assert!(matches!(LinkSnr::new(-1.0), Err(Error::Domain(_))));
        assert!(LinkSnr::new(f64::NAN).is_err());
    }

    #[test]
    fn db_round_trip() {
        for &db in &[-30.0, -3.0, 0.0, 7.5, 40.0] {
            let s = LinkSnr::from_db(db).unwrap();
            assert!((s.db() - db).abs() <= 1e-12 * db.abs().max(1.0));
        }
    }

    #[test]
    fn half_epsilon_removes_the_backoff() {
        for &n in &[1u64, 7, 100, 12345] {
            let r = max_coding_rate(n, 0.5, snr(2.0)).unwrap();
            let nf = n as f64;
            assert_eq!(r, awgn_capacity(snr(2.0)) + nf.log2() / (2.0 * nf));
        }
    }

    #[test]
    fn long_block_rate_near_capacity() {
        let r = max_coding_rate(1_000_000, 1e-5, snr(1.0)).unwrap();
        // mpmath evaluation of the same expression: R - C = -0.0053186337909
        assert!((r - 1.0 + 0.005_318_633_790_945).abs() < 1e-12);
        assert!((r - 1.0).abs() < 0.01);
    }

    #[test]
    fn doubling_blocklength_raises_rate() {
        for &eps in &[1e-9, 1e-5, 1e-2, 0.2] {
            for &n in &[100u64, 1000, 10_000] {
                let a = max_coding_rate(n, eps, snr(1.0)).unwrap();
                let b = max_coding_rate(2 * n, eps, snr(1.0)).unwrap();
                assert!(b > a, "eps={eps} n={n}");
            }
        }
    }

    // Frozen from an exhaustive integer scan evaluated with mpmath.
    const SCAN_ORACLE: &[(u64, f64, f64, u64)] = &[
        (256, 1e-5, 1.0, 352),
        (512, 1e-5, 1.0, 643),
        (1024, 1e-5, 1.0, 1204),
        (64, 1e-3, 4.0, 39),
        (128, 1e-5, 0.5, 361),
        (1, 0.5, 3.0, 1),
        (32, 1e-5, 1.0, 76),
        (16, 1e-5, 1.0, 52),
    ];

    #[test]
    fn min_blocklength_matches_scan_oracle() {
        for &(k, eps, s, n) in SCAN_ORACLE {
            assert_eq!(min_blocklength(k, eps, snr(s)).unwrap(), n, "k={k} eps={eps} snr={s}");
        }
    }

    #[test]
    fn joint_encoding_is_cheaper_than_two_blocks() {
        let one = min_blocklength(256, 1e-5, snr(1.0)).unwrap();
        let two = min_blocklength(512, 1e-5, snr(1.0)).unwrap();
        assert!(two < 2 * one);
    }

    #[test]
    fn error_prob_examples() {
        // k/n = C + log2(n)/(2n) exactly: choose snr = 3, n = 16 -> C = 2, k = 32 + 2 = 34
        let e = error_prob(16, 34, snr(3.0)).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
        let e = error_prob(100, 10_000, snr(1.0)).unwrap();
        assert!(e > 1.0 - 1e-9 && e < 1.0);
        let e = error_prob(100_000, 10, snr(1.0)).unwrap();
        assert!(e > 0.0);
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        assert!(max_coding_rate(0, 0.1, snr(1.0)).is_err());
        assert!(max_coding_rate(10, 0.0, snr(1.0)).is_err());
        assert!(max_coding_rate(10, 1.0, snr(1.0)).is_err());
        assert!(min_blocklength(0, 0.1, snr(1.0)).is_err());
        assert!(CodeSpec::new(10, 10, 1.5).is_err());
    }
}
