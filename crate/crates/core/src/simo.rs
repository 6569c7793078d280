//! Symbol-error simulation for a single-antenna transmitter and an
//! `M`-antenna receiver, `y = h x + z + w`.
//!
//! Coherent MRC combines with a channel estimate whose correlation with the
//! true channel degrades with the mobility index `sigma`:
//! `h_est = (1 - sigma) h + sqrt(1 - (1 - sigma)^2) e`, so `sigma = 0` is a
//! perfect estimate, `sigma = 1` an independent one, and the estimate keeps
//! unit variance throughout. Energy detection never looks at an estimate.
//!
//! Trials run in fixed-size chunks, each seeded from `(seed, chunk index)`,
//! so results do not depend on the number of worker threads.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbl::LinkSnr;
use crate::seed::{child_rng, derive_seed, SimRng};
use crate::stats::Z95;

const CHUNK_TRIALS: u64 = 2048;

/// Receive antenna count used by default for the coherent/non-coherent comparison.
pub const DEFAULT_ANTENNAS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimoChannel {
    pub m_antennas: usize,
    /// Average transmit energy over noise power, per antenna.
    pub snr: LinkSnr,
    pub sigma: f64,
    pub interference_power: f64,
}

impl SimoChannel {
    pub fn new(m_antennas: usize, snr: LinkSnr, sigma: f64) -> Result<Self> {
        let ch = SimoChannel { m_antennas, snr, sigma, interference_power: 0.0 };
        ch.validate()?;
        Ok(ch)
    }

    pub fn with_interference(mut self, power: f64) -> Result<Self> {
        self.interference_power = power;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.m_antennas == 0 {
            return Err(Error::Usage("need at least one receive antenna".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::Domain(format!("mobility index must lie in [0, 1], got {}", self.sigma)));
        }
        if !(self.interference_power >= 0.0 && self.interference_power.is_finite()) {
            return Err(Error::Domain("interference power must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn noise_power(&self) -> f64 {
        1.0 / self.snr.linear()
    }

    /// Correlation between the true channel and its estimate.
    pub fn estimate_correlation(&self) -> f64 {
        1.0 - self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SerResult {
    pub ser: f64,
    pub trials: u64,
    pub errors: u64,
}

impl SerResult {
    fn new(errors: u64, trials: u64) -> Self {
        SerResult { ser: errors as f64 / trials as f64, trials, errors }
    }

    /// Normal-approximation 95% half-width of the SER estimate.
    pub fn half_width(&self) -> f64 {
        Z95 * (self.ser * (1.0 - self.ser) / self.trials as f64).sqrt()
    }
}

fn cn(rng: &mut SimRng, power: f64) -> Complex64 {
    let s = (power).sqrt() * FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Unit-average-energy L-PAM amplitudes.
pub fn pam_levels(levels: usize) -> Vec<f64> {
    let l = levels as f64;
    let scale = (3.0 / (l * l - 1.0)).sqrt();
    (0..levels).map(|i| (2.0 * i as f64 - (l - 1.0)) * scale).collect()
}

/// Unipolar levels equally spaced in energy with unit average energy.
pub fn ed_energies(levels: usize) -> Vec<f64> {
    (0..levels).map(|i| 2.0 * i as f64 / (levels - 1) as f64).collect()
}

fn nearest(points: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        let d = (p - v).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn check_run(levels: usize, trials: u64) -> Result<()> {
    if levels < 2 {
        return Err(Error::Usage(format!("constellation needs >= 2 points, got {levels}")));
    }
    if trials == 0 {
        return Err(Error::Usage("trials must be >= 1".into()));
    }
    Ok(())
}

fn chunked(trials: u64, seed: u64, label: &str, run: impl Fn(&mut SimRng, u64) -> u64 + Sync) -> u64 {
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
            let mut rng = child_rng(seed, label, c);
            run(&mut rng, n)
        })
        .sum()
}

/// Coherent maximum-ratio combining with an imperfect channel estimate.
pub fn simulate_mrc_ser(channel: &SimoChannel, levels: usize, trials: u64, seed: u64) -> Result<SerResult> {
    check_run(levels, trials)?;
    channel.validate()?;
    let pam = pam_levels(levels);
    let m = channel.m_antennas;
    let n0 = channel.noise_power();
    let iw = channel.interference_power;
    let rho = channel.estimate_correlation();
    let mix = (1.0 - rho * rho).max(0.0).sqrt();

    let errors = chunked(trials, seed, "mrc", |rng, n| {
        let mut errs = 0;
        for _ in 0..n {
            let sym = rng.random_range(0..levels);
            let x = pam[sym];
            let mut num = Complex64::new(0.0, 0.0);
            let mut gain = 0.0;
            for _ in 0..m {
                let h = cn(rng, 1.0);
                let e = cn(rng, 1.0);
                let z = cn(rng, n0);
                let w = if iw > 0.0 { cn(rng, iw) } else { Complex64::new(0.0, 0.0) };
                let y = h * x + z + w;
                let h_est = h * rho + e * mix;
                num += h_est.conj() * y;
                gain += h_est.norm_sqr();
            }
            let r = if gain > 0.0 { num.re / gain } else { 0.0 };
            if nearest(&pam, r) != sym {
                errs += 1;
            }
        }
        errs
    });
    Ok(SerResult::new(errors, trials))
}

/// Non-coherent energy detection on `|y|^2 / M`.
pub fn simulate_ed_ser(channel: &SimoChannel, levels: usize, trials: u64, seed: u64) -> Result<SerResult> {
    check_run(levels, trials)?;
    channel.validate()?;
    let energies = ed_energies(levels);
    let amps: Vec<f64> = energies.iter().map(|e| e.sqrt()).collect();
    let m = channel.m_antennas;
    let n0 = channel.noise_power();
    let iw = channel.interference_power;
    let expected: Vec<f64> = energies.iter().map(|e| e + n0 + iw).collect();

    let errors = chunked(trials, seed, "ed", |rng, n| {
        let mut errs = 0;
        for _ in 0..n {
            let sym = rng.random_range(0..levels);
            let a = amps[sym];
            let mut energy = 0.0;
            for _ in 0..m {
                let h = cn(rng, 1.0);
                let z = cn(rng, n0);
                let w = if iw > 0.0 { cn(rng, iw) } else { Complex64::new(0.0, 0.0) };
                energy += (h * a + z + w).norm_sqr();
            }
            if nearest(&expected, energy / m as f64) != sym {
                errs += 1;
            }
        }
        errs
    });
    Ok(SerResult::new(errors, trials))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub snr_db: f64,
    pub sigma: f64,
    pub ser_mrc: f64,
    pub ser_ed: f64,
    /// `log10(ser_mrc / ser_ed)`; positive means energy detection wins.
    pub gain_log10: f64,
    pub trials: u64,
    /// A zero SER was replaced by the resolution bound `1 / trials`.
    pub censored: bool,
    #[serde(skip)]
    pub mrc_half_width: f64,
    #[serde(skip)]
    pub ed_half_width: f64,
}

#[derive(Debug, Clone)]
pub struct HeatmapSpec {
    pub snr_grid_db: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub m_antennas: usize,
    pub levels: usize,
    pub trials: u64,
    pub interference_power: f64,
}

/// SER gain of energy detection over MRC on an (snr, sigma) grid, row-major in snr.
///
/// Every cell at the same SNR shares its random draws, so the sigma axis is
/// a common-random-numbers comparison.
pub fn ser_gain_heatmap(spec: &HeatmapSpec, seed: u64) -> Result<Vec<HeatmapCell>> {
    if spec.snr_grid_db.is_empty() || spec.sigma_grid.is_empty() {
        return Err(Error::Usage("heat map grids must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(spec.snr_grid_db.len() * spec.sigma_grid.len());
    for (si, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        let snr = LinkSnr::from_db(snr_db)?;
        let ed_seed = derive_seed(seed, "heatmap-ed", si as u64);
        let mrc_seed = derive_seed(seed, "heatmap-mrc", si as u64);
        let base = SimoChannel::new(spec.m_antennas, snr, 0.0)?.with_interference(spec.interference_power)?;
        let ed = simulate_ed_ser(&base, spec.levels, spec.trials, ed_seed)?;
        for &sigma in &spec.sigma_grid {
            let ch = SimoChannel { sigma, ..base };
            let mrc = simulate_mrc_ser(&ch, spec.levels, spec.trials, mrc_seed)?;
            let floor = 1.0 / spec.trials as f64;
            let censored = mrc.errors == 0 || ed.errors == 0;
            let gain = (mrc.ser.max(floor) / ed.ser.max(floor)).log10();
            cells.push(HeatmapCell {
                snr_db,
                sigma,
                ser_mrc: mrc.ser,
                ser_ed: ed.ser,
                gain_log10: gain,
                trials: spec.trials,
                censored,
                mrc_half_width: mrc.half_width(),
                ed_half_width: ed.half_width(),
            });
        }
    }
    Ok(cells)
}

/// Writes `snr_db,sigma,ser_mrc,ser_ed,gain_log10,trials,censored`.
pub fn write_heatmap_csv<W: Write>(out: W, cells: &[HeatmapCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}
