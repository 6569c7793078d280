//! Base-station densification on Poisson point layouts.
//!
//! Base stations and users are dropped as homogeneous Poisson point
//! processes on a square torus (wrap-around distances). Each user attaches
//! to its nearest base station and shares its bandwidth equally with the
//! other users there. Base stations without users stay silent, unless
//! cooperation is enabled: then each idle base station may take one user as
//! an extra association. The serving and cooperating stations cancel each
//! other's interference towards that user and their rates add up.
//!
//! Latency is a proxy: the time to push `payload_bits` at the Shannon rate
//! of the user's links.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{child_rng, derive_seed, rng_from_seed};
use crate::stats::MeanCi;

/// Distances are floored here to keep path loss finite.
pub const MIN_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioParams {
    pub pathloss_exponent: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub bandwidth: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::Domain("path-loss exponent must exceed 2".into()));
        }
        if !(self.tx_power > 0.0 && self.noise_power > 0.0 && self.bandwidth > 0.0) {
            return Err(Error::Domain("tx_power, noise_power and bandwidth must be > 0".into()));
        }
        Ok(())
    }
}

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub side: f64,
    pub bs_points: Vec<Point>,
    pub user_points: Vec<Point>,
    pub radio: RadioParams,
}

impl NetworkSnapshot {
    /// Wrap-around distance, floored at [`MIN_DISTANCE`].
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let mut dx = (a.0 - b.0).abs();
        let mut dy = (a.1 - b.1).abs();
        dx = dx.min(self.side - dx);
        dy = dy.min(self.side - dy);
        dx.hypot(dy).max(MIN_DISTANCE)
    }

    /// Squared wrap-around distance without the floor; ordering only.
    pub fn distance_sq(&self, a: Point, b: Point) -> f64 {
        let mut dx = (a.0 - b.0).abs();
        let mut dy = (a.1 - b.1).abs();
        dx = dx.min(self.side - dx);
        dy = dy.min(self.side - dy);
        dx * dx + dy * dy
    }

    fn rx_power(&self, bs: usize, user: usize) -> f64 {
        let d = self.distance(self.bs_points[bs], self.user_points[user]);
        self.radio.tx_power * d.powf(-self.radio.pathloss_exponent)
    }
}

/// Poisson counts with uniform placement on a `side x side` torus.
pub fn sample_network(lambda_b: f64, lambda_u: f64, side: f64, radio: RadioParams, seed: u64) -> Result<NetworkSnapshot> {
    if !(lambda_b > 0.0 && lambda_u > 0.0 && side > 0.0) {
        return Err(Error::Domain("densities and area side must be > 0".into()));
    }
    radio.validate()?;
    let mut rng = rng_from_seed(seed);
    let area = side * side;
    let mut drop_points = |lambda: f64| -> Result<Vec<Point>> {
        let n: f64 = Poisson::new(lambda * area).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut rng);
        Ok((0..n as usize).map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side)).collect())
    };
    let bs_points = drop_points(lambda_b)?;
    let user_points = drop_points(lambda_u)?;
    Ok(NetworkSnapshot { side, bs_points, user_points, radio })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationPlan {
    pub serving: Vec<Option<usize>>,
    pub cooperating: Vec<Option<usize>>,
    /// Per base station: no user is served by it.
    pub idle: Vec<bool>,
}

impl AssociationPlan {
    pub fn load(&self, bs: usize) -> usize {
        self.serving.iter().filter(|s| **s == Some(bs)).count()
    }

    /// Base stations that transmit: every non-idle one plus idle ones with a cooperation duty.
    pub fn active(&self) -> Vec<bool> {
        let mut active: Vec<bool> = self.idle.iter().map(|i| !i).collect();
        for c in self.cooperating.iter().flatten() {
            active[*c] = true;
        }
        active
    }
}

/// Nearest-station association; with `cooperation`, idle stations are
/// matched to users greedily by increasing distance, one user each.
pub fn associate(net: &NetworkSnapshot, cooperation: bool) -> AssociationPlan {
    let serving: Vec<Option<usize>> = net
        .user_points
        .iter()
        .map(|&up| {
            (0..net.bs_points.len())
                .map(|b| (net.distance_sq(net.bs_points[b], up), b))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, b)| b)
        })
        .collect();
    let mut idle = vec![true; net.bs_points.len()];
    for s in serving.iter().flatten() {
        idle[*s] = false;
    }
    let mut cooperating = vec![None; net.user_points.len()];
    if cooperation {
        let idle_ids: Vec<usize> = (0..idle.len()).filter(|&b| idle[b]).collect();
        // A user's greedy match is always among its `n_users` nearest idle stations.
        let keep = idle_ids.len().min(net.user_points.len());
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(keep * net.user_points.len());
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(idle_ids.len());
        for u in 0..net.user_points.len() {
            cand.clear();
            cand.extend(idle_ids.iter().map(|&b| (net.distance_sq(net.bs_points[b], net.user_points[u]), b)));
            if keep > 0 && keep < cand.len() {
                cand.select_nth_unstable_by(keep - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            }
            pairs.extend(cand[..keep].iter().map(|&(d, b)| (d, u, b)));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut bs_taken = vec![false; idle.len()];
        for (_, u, b) in pairs {
            if cooperating[u].is_none() && !bs_taken[b] {
                cooperating[u] = Some(b);
                bs_taken[b] = true;
            }
        }
    }
    AssociationPlan { serving, cooperating, idle }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Serving,
    Cooperating,
}

/// SINR of `user` from station `bs` with the given set of interfering stations.
pub fn sinr_from(net: &NetworkSnapshot, user: usize, bs: usize, interferers: impl IntoIterator<Item = usize>) -> f64 {
    let interference: f64 = interferers.into_iter().map(|i| net.rx_power(i, user)).sum();
    net.rx_power(bs, user) / (net.radio.noise_power + interference)
}

/// SINR of one of the user's links under the plan's transmit pattern.
pub fn compute_sinr(net: &NetworkSnapshot, plan: &AssociationPlan, user: usize, link: Link) -> Result<f64> {
    let serving = plan.serving[user].ok_or_else(|| Error::Usage(format!("user {user} has no serving station")))?;
    let coop = plan.cooperating[user];
    let bs = match link {
        Link::Serving => serving,
        Link::Cooperating => coop.ok_or_else(|| Error::Usage(format!("user {user} has no cooperating station")))?,
    };
    let active = plan.active();
    let interferers = (0..active.len()).filter(|&b| active[b] && b != serving && Some(b) != coop);
    Ok(sinr_from(net, user, bs, interferers))
}

/// Seconds to deliver `payload_bits` to `user`.
pub fn user_latency(net: &NetworkSnapshot, plan: &AssociationPlan, user: usize, payload_bits: f64) -> Result<f64> {
    let serving = plan.serving[user].ok_or_else(|| Error::Usage(format!("user {user} has no serving station")))?;
    let share = 1.0 / plan.load(serving) as f64;
    let b = net.radio.bandwidth;
    let mut rate = share * b * compute_sinr(net, plan, user, Link::Serving)?.log2_1p();
    if plan.cooperating[user].is_some() {
        rate += b * compute_sinr(net, plan, user, Link::Cooperating)?.log2_1p();
    }
    Ok(payload_bits / rate)
}

/// Latency of every user; same values as [`user_latency`] per user.
pub fn all_user_latencies(net: &NetworkSnapshot, plan: &AssociationPlan, payload_bits: f64) -> Result<Vec<f64>> {
    let active = plan.active();
    let transmitters: Vec<usize> = (0..active.len()).filter(|&b| active[b]).collect();
    let mut load = vec![0usize; net.bs_points.len()];
    for s in plan.serving.iter().flatten() {
        load[*s] += 1;
    }
    let bw = net.radio.bandwidth;
    (0..net.user_points.len())
        .map(|u| {
            let serving = plan.serving[u].ok_or_else(|| Error::Usage(format!("user {u} has no serving station")))?;
            let coop = plan.cooperating[u];
            let interferers = || transmitters.iter().copied().filter(|&b| b != serving && Some(b) != coop);
            let share = 1.0 / load[serving] as f64;
            let mut rate = share * bw * sinr_from(net, u, serving, interferers()).log2_1p();
            if let Some(c) = coop {
                rate += bw * sinr_from(net, u, c, interferers()).log2_1p();
            }
            Ok(payload_bits / rate)
        })
        .collect()
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    Baseline,
    Cooperation,
}

impl DensityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DensityMode::Baseline => "baseline",
            DensityMode::Cooperation => "cooperation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensificationConfig {
    pub payload_bits: f64,
    pub lambda_bs: Vec<f64>,
    pub lambda_u: f64,
    pub area_side: f64,
    pub radio: RadioParams,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPoint {
    pub lambda_bs: f64,
    pub mode: DensityMode,
    pub mean_latency_s: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub replications: usize,
    /// Per-replication mean user latency, in replication order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Mean user latency per density and mode. Replication `r` at density `i`
/// uses the same snapshot for every mode, so modes compare pairwise.
/// Replications without users or stations are skipped.
pub fn latency_vs_density(cfg: &DensificationConfig, modes: &[DensityMode], seed: u64) -> Result<Vec<DensityPoint>> {
    if cfg.lambda_bs.is_empty() {
        return Err(Error::Usage("density grid is empty".into()));
    }
    if !(cfg.payload_bits > 0.0) {
        return Err(Error::Domain("payload_bits must be > 0".into()));
    }
    let mut out = Vec::new();
    for (i, &lambda_b) in cfg.lambda_bs.iter().enumerate() {
        let per_rep: Vec<Option<Vec<f64>>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let s = derive_seed(derive_seed(seed, "density", i as u64), "replication", r as u64);
                let net = sample_network(lambda_b, cfg.lambda_u, cfg.area_side, cfg.radio, s)?;
                if net.user_points.is_empty() || net.bs_points.is_empty() {
                    return Ok(None);
                }
                modes
                    .iter()
                    .map(|&m| {
                        let plan = associate(&net, m == DensityMode::Cooperation);
                        let lat = all_user_latencies(&net, &plan, cfg.payload_bits)?;
                        Ok(lat.iter().sum::<f64>() / lat.len() as f64)
                    })
                    .collect::<Result<Vec<f64>>>()
                    .map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, &mode) in modes.iter().enumerate() {
            let samples: Vec<f64> = per_rep.iter().flatten().map(|v| v[k]).collect();
            let ci = MeanCi::from_samples(&samples);
            out.push(DensityPoint {
                lambda_bs: lambda_b,
                mode,
                mean_latency_s: ci.mean,
                ci95_low: ci.low,
                ci95_high: ci.high,
                replications: samples.len(),
                samples,
            });
        }
    }
    Ok(out)
}

/// Writes `lambda_bs,mode,mean_latency_s,ci95_low,ci95_high,replications`.
pub fn write_density_csv<W: Write>(out: W, points: &[DensityPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Uniform points for tests and benches that need a fixed layout.
pub fn uniform_points(n: usize, side: f64, seed: u64) -> Vec<Point> {
    let mut rng = child_rng(seed, "uniform", 0);
    (0..n).map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radio(noise: f64) -> RadioParams {
        RadioParams { pathloss_exponent: 4.0, tx_power: 1.0, noise_power: noise, bandwidth: 1e6 }
    }

    fn net(bs: Vec<Point>, users: Vec<Point>, noise: f64) -> NetworkSnapshot {
        NetworkSnapshot { side: 1000.0, bs_points: bs, user_points: users, radio: radio(noise) }
    }

    #[test]
    fn single_station_sinr_is_snr() {
        let n = net(vec![(0.0, 0.0)], vec![(10.0, 0.0)], 1e-6);
        let plan = associate(&n, false);
        let sinr = compute_sinr(&n, &plan, 0, Link::Serving).unwrap();
        assert!((sinr - 1e-4 / 1e-6).abs() < 1e-9);
    }

    #[test]
    fn doubling_power_doubles_noise_limited_sinr() {
        let mut n = net(vec![(0.0, 0.0)], vec![(10.0, 0.0)], 1e-6);
        let plan = associate(&n, false);
        let a = compute_sinr(&n, &plan, 0, Link::Serving).unwrap();
        n.radio.tx_power = 2.0;
        let b = compute_sinr(&n, &plan, 0, Link::Serving).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn extra_interferer_lowers_sinr() {
        let n = net(vec![(0.0, 0.0), (50.0, 0.0), (0.0, 60.0)], vec![(10.0, 0.0)], 1e-9);
        let one = sinr_from(&n, 0, 0, [1]);
        let two = sinr_from(&n, 0, 0, [1, 2]);
        let none = sinr_from(&n, 0, 0, []);
        assert!(two < one && one < none);
    }

    #[test]
    fn latency_example() {
        // SINR = 3, share = 1 -> payload / (2 B)
        let mut n = net(vec![(0.0, 0.0)], vec![(10.0, 0.0)], 1.0);
        n.radio.tx_power = 3.0 * 1e4;
        let plan = associate(&n, false);
        let l = user_latency(&n, &plan, 0, 1000.0).unwrap();
        assert!((l - 1000.0 / 2e6).abs() < 1e-15);
    }

    #[test]
    fn co_located_user_uses_distance_floor() {
        let n = net(vec![(5.0, 5.0)], vec![(5.0, 5.0)], 1.0);
        let plan = associate(&n, false);
        assert_eq!(compute_sinr(&n, &plan, 0, Link::Serving).unwrap(), 1.0);
    }

    #[test]
    fn cooperation_uses_idle_stations_only() {
        let n = net(vec![(0.0, 0.0), (30.0, 0.0), (500.0, 500.0)], vec![(1.0, 0.0), (2.0, 0.0)], 1e-9);
        let plan = associate(&n, true);
        assert_eq!(plan.serving, vec![Some(0), Some(0)]);
        assert!(!plan.idle[0] && plan.idle[1] && plan.idle[2]);
        for (u, c) in plan.cooperating.iter().enumerate() {
            let c = c.unwrap();
            assert!(plan.idle[c]);
            assert_ne!(Some(c), plan.serving[u]);
        }
        assert_ne!(plan.cooperating[0], plan.cooperating[1]);
    }

    #[test]
    fn batch_latencies_match_single_user_path() {
        let n = sample_network(0.05, 0.01, 60.0, radio(1e-10), 3).unwrap();
        for coop in [false, true] {
            let plan = associate(&n, coop);
            let all = all_user_latencies(&n, &plan, 1e4).unwrap();
            for (u, l) in all.iter().enumerate() {
                let single = user_latency(&n, &plan, u, 1e4).unwrap();
                assert!((l - single).abs() <= 1e-12 * single);
            }
        }
    }

    #[test]
    fn torus_distance_wraps() {
        let n = net(vec![], vec![], 1.0);
        assert!((n.distance((1.0, 1.0), (999.0, 1.0)) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sample_is_deterministic_and_may_be_empty() {
        let a = sample_network(0.01, 0.001, 20.0, radio(1e-9), 5).unwrap();
        assert_eq!(a, sample_network(0.01, 0.001, 20.0, radio(1e-9), 5).unwrap());
        let empties = (0..200)
            .filter(|&s| sample_network(0.01, 0.001, 20.0, radio(1e-9), s).unwrap().user_points.is_empty())
            .count();
        assert!(empties > 0);
        assert!(sample_network(0.0, 0.1, 10.0, radio(1e-9), 1).is_err());
        let mut bad = radio(1e-9);
        bad.pathloss_exponent = 2.0;
        assert!(sample_network(0.1, 0.1, 10.0, bad, 1).is_err());
    }
}
