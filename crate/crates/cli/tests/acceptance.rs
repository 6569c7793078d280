//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so every verdict is printed even when an
//! earlier one fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urllc_core::access::{resolve_frame, run_grant_free, GrantFreeConfig, ReceiverModel, SlotGrid};
use urllc_core::diversity::{
    align, load_trace, pd_latency, reliability_curve, synth_trace, AlignedTraces, PdConfig, TraceModel,
    DEFAULT_ALIGN_TOLERANCE_S,
};
use urllc_core::fbl::{awgn_capacity, error_prob, max_coding_rate, min_blocklength};
use urllc_core::frame::{set_partitions, FrameDesigner, HeaderPolicy, MessageSpec};
use urllc_core::minislot::{urllc_latency_cdf, verify_placements, MinislotLoad, RadioTimeline};
use urllc_core::reliability::{chain_success, log_grid, packet_success, rounded_product, ProtocolChain, StageModel};
use urllc_core::simo::{ser_gain_heatmap, HeatmapSpec};
use urllc_core::stats::{binomial_std, spearman, spearman_upper_bound, Z95};
use urllc_core::topology::{latency_vs_density, DensificationConfig, DensityMode, RadioParams};
use urllc_core::LinkSnr;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn snr(x: f64) -> LinkSnr {
    LinkSnr::new(x).unwrap()
}

fn algebra() -> Verdict {
    let three = ProtocolChain::new(vec![0.99; 3]).unwrap();
    ensure(chain_success(&three) == 0.970299, || format!("(0.99)^3 = {:?}", chain_success(&three)))?;
    let stages = StageModel::new(0.99, 0.99, 0.99).unwrap();
    ensure(packet_success(&stages) == 0.970299, || "stage product is not 0.970299".into())?;
    // dyadic rationals are exact in binary, so the product must be too
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let len = rng.random_range(1..6);
        let num: Vec<u64> = (0..len).map(|_| rng.random_range(0..=8)).collect();
        let xs: Vec<f64> = num.iter().map(|&a| a as f64 / 8.0).collect();
        let exact = num.iter().product::<u64>() as f64 / 8f64.powi(len);
        ensure(rounded_product(xs.iter().copied()) == exact, || format!("{xs:?}"))?;
    }
    for _ in 0..10_000 {
        let steps: Vec<f64> = (0..rng.random_range(1..12)).map(|_| rng.random::<f64>()).collect();
        let p = chain_success(&ProtocolChain::new(steps.clone()).unwrap());
        let extra = rng.random::<f64>();
        let longer = chain_success(&ProtocolChain::new(steps).unwrap().then(extra).unwrap());
        ensure(longer <= p, || format!("appending {extra} raised {p} to {longer}"))?;
    }
    Ok("(0.99)^3 == 0.970299, 10k dyadic products exact, 10k appended chains monotone".into())
}

fn fbl_limits() -> Verdict {
    for n in [1u64, 10, 1000, 10_000_000] {
        for s in [0.1, 1.0, 10.0] {
            let want = awgn_capacity(snr(s)) + (n as f64).log2() / (2.0 * n as f64);
            ensure(max_coding_rate(n, 0.5, snr(s)).unwrap() == want, || format!("eps=0.5 n={n} snr={s}"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let k = rng.random_range(1..4096u64);
        let eps = 10f64.powf(rng.random_range(-9.0..-1.0));
        let s = snr(10f64.powf(rng.random_range(-1.0..2.0)));
        let n = min_blocklength(k, eps, s).unwrap();
        let e = error_prob(n, k, s).unwrap();
        ensure(e <= eps * (1.0 + 1e-9), || format!("round trip k={k} eps={eps}: n={n} gives {e}"))?;
    }
    let gaps: Vec<(f64, f64)> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&s| (s, max_coding_rate(10_000_000, 1e-5, snr(s)).unwrap() - awgn_capacity(snr(s))))
        .collect();
    let shown = gaps.iter().map(|(s, g)| format!("snr {s}: {g:.3e}")).collect::<Vec<_>>().join(", ");
    ensure(gaps.iter().all(|(_, g)| g.abs() < 1e-3), || format!("|R*(1e7,1e-5) - C| < 1e-3 violated ({shown})"))?;
    Ok(format!("eps=0.5 exact, 100 round trips, gaps {shown}"))
}

fn frame_designer() -> Verdict {
    let mut checked = 0;
    for b in [64u64, 128, 256, 512, 1024] {
        for eps in [1e-3, 1e-5] {
            for s in [0.5, 1.0, 4.0] {
                for n in 2..=4u32 {
                    let m: Vec<MessageSpec> = (0..n).map(|i| MessageSpec::new(i, b, eps).unwrap()).collect();
                    let d = FrameDesigner::new(snr(s), HeaderPolicy::UnionSplit);
                    let joint = d.plan_joint(&m).unwrap();
                    let sep = d.plan_separate(&m).unwrap();
                    ensure(joint.total_cu < sep.total_cu, || format!("b={b} eps={eps} snr={s} n={n}"))?;
                    if n == 4 {
                        let curve = d.tradeoff_curve(&m, &set_partitions(4)).unwrap();
                        let point = |id: &str| curve.iter().find(|p| p.grouping_id == id).unwrap();
                        let (j, p) = (point("0+1+2+3"), point("0|1|2|3"));
                        ensure(j.total_cu == joint.total_cu && j.max_device_energy_cu == joint.max_device_energy(), || {
                            format!("joint extreme b={b} eps={eps} snr={s}")
                        })?;
                        ensure(p.total_cu == sep.total_cu && p.max_device_energy_cu == sep.max_device_energy(), || {
                            format!("separate extreme b={b} eps={eps} snr={s}")
                        })?;
                        ensure(curve[0] == *j, || "joint plan is not the shortest frame".into())?;
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} grid points, extremes exact"))
}

fn slotted_aloha() -> Verdict {
    let cfg = GrantFreeConfig {
        n_devices: 10_000,
        activation_prob: 0.01,
        k_replicas: 1,
        frame_len: 100,
        n_frames: 1000,
        slot_duration: 1e-3,
        receiver: ReceiverModel::new(1, false, false, 1.0).unwrap(),
        record_devices: false,
    };
    let s = run_grant_free(&cfg, 11).unwrap().throughput();
    let target = (-1f64).exp();
    let tol = 3.0 * binomial_std(target, 100_000);
    ensure((s - target).abs() <= tol, || format!("throughput {s:.5}, e^-1 {target:.5} +- {tol:.5}"))?;
    Ok(format!("throughput {s:.5} within {tol:.5} of e^-1"))
}

/// Decode slot per device, recomputing the fixed point from scratch on every prefix.
fn sic_oracle(frame_len: usize, patterns: &[Vec<usize>], gamma: usize, sic: bool) -> Vec<Option<usize>> {
    let n = patterns.len();
    let mut first = vec![None; n];
    for t in 0..frame_len {
        let mut decoded = vec![false; n];
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..=t {
                let load = (0..n).filter(|&d| patterns[d].contains(&s) && !(sic && decoded[d])).count();
                if load <= gamma {
                    for d in 0..n {
                        if patterns[d].contains(&s) && !decoded[d] {
                            decoded[d] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        for d in 0..n {
            if decoded[d] && first[d].is_none() {
                first[d] = Some(t);
            }
        }
    }
    first
}

fn sic_equivalence() -> Verdict {
    let mut checked = 0u64;
    for frame_len in 1..=4 {
        let mut pats: Vec<Vec<usize>> = (0..frame_len).map(|s| vec![s]).collect();
        for a in 0..frame_len {
            for b in a + 1..frame_len {
                pats.push(vec![a, b]);
            }
        }
        for n in 1..=4u32 {
            for code in 0..pats.len().pow(n) {
                let mut c = code;
                let chosen: Vec<Vec<usize>> = (0..n)
                    .map(|_| {
                        let p = pats[c % pats.len()].clone();
                        c /= pats.len();
                        p
                    })
                    .collect();
                let mut grid = SlotGrid::new(frame_len, 1.0);
                for (d, p) in chosen.iter().enumerate() {
                    grid.add_device(d as u32, p).unwrap();
                }
                for gamma in 1..=4 {
                    for sic in [false, true] {
                        let want = sic_oracle(frame_len, &chosen, gamma, sic);
                        for combining in [false, true] {
                            let rx = ReceiverModel::new(gamma, sic, combining, 1.0).unwrap();
                            let got: Vec<Option<usize>> =
                                resolve_frame(&grid, &rx, code as u64).devices.iter().map(|d| d.decoded_at).collect();
                            ensure(got == want, || format!("F={frame_len} {chosen:?} gamma={gamma} sic={sic}"))?;
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checked} configurations match"))
}

fn simo_sign_structure() -> Verdict {
    let spec = HeatmapSpec {
        snr_grid_db: vec![0.0, 10.0],
        sigma_grid: vec![0.0, 0.9],
        m_antennas: 128,
        levels: 2,
        trials: 100_000,
        interference_power: 0.0,
    };
    let cells = ser_gain_heatmap(&spec, 20_170_614).unwrap();
    let gain = |s: f64, sigma: f64| cells.iter().find(|c| c.snr_db == s && c.sigma == sigma).unwrap().gain_log10;
    let (g0, g10, g_stale) = (gain(0.0, 0.0), gain(10.0, 0.0), gain(10.0, 0.9));
    let summary = format!("gain(0dB,0)={g0:.3}, gain(10dB,0)={g10:.3}, gain(10dB,0.9)={g_stale:.3}");
    ensure(g0 <= 0.0 && g10 <= 0.0 && g_stale >= 1.0, || summary.clone())?;
    Ok(summary)
}

fn trace_model(median: f64, loss: f64) -> TraceModel {
    TraceModel {
        base_median_ms: median,
        base_sigma: 0.4,
        spike_weight: 0.03,
        spike_scale_ms: 50.0,
        spike_shape: 1.5,
        loss_prob: loss,
    }
}

fn dominance(aligned: &AlignedTraces) -> Result<usize, String> {
    let grid = log_grid(1e-3, 10.0, 200);
    let names = &aligned.names;
    let configs: Vec<PdConfig> = (1u32..(1 << names.len()))
        .map(|mask| {
            let interfaces: Vec<String> =
                names.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, n)| n.clone()).collect();
            PdConfig { name: interfaces.join("+"), interfaces }
        })
        .collect();
    let curves: Vec<_> =
        configs.iter().map(|c| reliability_curve(&pd_latency(aligned, c).unwrap(), &grid).unwrap()).collect();
    let mut compared = 0;
    for (c, combined) in configs.iter().zip(&curves) {
        for (o, component) in configs.iter().zip(&curves) {
            if o.interfaces.iter().all(|i| c.interfaces.contains(i)) {
                for (a, b) in combined.iter().zip(component) {
                    ensure(a.reliability >= b.reliability, || format!("{} < {} at {}", c.name, o.name, a.deadline_s))?;
                    compared += 1;
                }
            }
        }
    }
    Ok(compared)
}

fn trace_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/traces")
}

fn pd_dominance() -> Verdict {
    let synthetic = vec![
        synth_trace("lte", &trace_model(30.0, 0.01), 600.0, 100.0, 1).unwrap(),
        synth_trace("hspa", &trace_model(45.0, 0.02), 600.0, 100.0, 2).unwrap(),
        synth_trace("wifi", &trace_model(8.0, 0.05), 600.0, 100.0, 3).unwrap(),
    ];
    let a = dominance(&align(&synthetic, DEFAULT_ALIGN_TOLERANCE_S).unwrap())?;
    let recorded: Vec<_> =
        ["lte", "hspa", "wifi"].iter().map(|n| load_trace(&trace_dir().join(format!("{n}.csv"))).unwrap()).collect();
    ensure(recorded.iter().all(|t| t.len() == 1000), || "checked-in traces must hold 1000 events".into())?;
    let b = dominance(&align(&recorded, DEFAULT_ALIGN_TOLERANCE_S).unwrap())?;
    Ok(format!("{a} synthetic and {b} checked-in comparisons"))
}

fn minislot() -> Verdict {
    let ts = 1.0 / 14_000.0;
    let load = MinislotLoad {
        rate: 0.05 / ts,
        size_weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        timeline: RadioTimeline::new(300_000, 1, ts).unwrap(),
    };
    let r = urllc_latency_cdf(&load, 1).unwrap();
    verify_placements(&load.timeline, &r.arrivals, &r.outcome).map_err(|e| e.to_string())?;
    for p in r.outcome.placements.iter().flatten() {
        let clash = (p.start_symbol..p.end_symbol()).any(|s| load.timeline.is_control(s));
        ensure(!clash, || format!("placement at {} overlaps control", p.start_symbol))?;
    }
    let n = r.arrivals.len();
    let util = r.embb_loss_fraction;
    ensure(n >= 100_000 && util < 0.1, || format!("{n} arrivals at utilization {util:.4}"))?;
    let p99 = r.cdf.latency_at_reliability(0.99).unwrap() / ts;
    ensure(p99 <= 7.0 + 1e-9, || format!("p99 {p99:.3} symbols"))?;
    Ok(format!("{n} arrivals, utilization {util:.4}, p99 {p99:.2} symbols, no control overlap"))
}

fn densification() -> Verdict {
    let grid = vec![0.1, 0.15, 0.2, 0.3, 0.5];
    let cfg = DensificationConfig {
        payload_bits: 1e4,
        lambda_bs: grid.clone(),
        lambda_u: 0.01,
        area_side: 100.0,
        radio: RadioParams { pathloss_exponent: 4.0, tx_power: 1.0, noise_power: 1e-10, bandwidth: 1e6 },
        replications: 1000,
    };
    let pts = latency_vs_density(&cfg, &[DensityMode::Baseline, DensityMode::Cooperation], 5).unwrap();
    let mut notes = Vec::new();
    for mode in [DensityMode::Baseline, DensityMode::Cooperation] {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for p in pts.iter().filter(|p| p.mode == mode) {
            x.extend(std::iter::repeat_n(p.lambda_bs, p.samples.len()));
            y.extend(&p.samples);
        }
        let rho = spearman(&x, &y);
        let upper = spearman_upper_bound(rho, x.len(), Z95);
        ensure(upper <= 0.0, || format!("{}: rho {rho:.3}, upper bound {upper:.3}", mode.as_str()))?;
        notes.push(format!("{} rho {rho:.3} (ub {upper:.3})", mode.as_str()));
    }
    for &l in &grid {
        let at = |m| pts.iter().find(|p| p.lambda_bs == l && p.mode == m).unwrap();
        let (base, coop) = (at(DensityMode::Baseline), at(DensityMode::Cooperation));
        ensure(coop.samples.len() == base.samples.len(), || "unpaired replications".into())?;
        let diff = coop.samples.iter().zip(&base.samples).map(|(c, b)| c - b).sum::<f64>() / base.samples.len() as f64;
        ensure(diff <= 0.0, || format!("cooperation above baseline at lambda_b {l}: {diff:.3e}"))?;
    }
    Ok(format!("{}, cooperation <= baseline at all {} densities", notes.join(", "), grid.len()))
}

const SMALL_CONFIGS: [(&str, &str); 9] = [
    ("latency_cdf", r#"{"n_trials": 20000}"#),
    ("frame_tradeoff", r#"{}"#),
    ("simo_heatmap", r#"{"m_antennas": 32, "trials": 500}"#),
    ("pd_interfaces", r#"{"duration_s": 60}"#),
    ("densification", r#"{"replications": 24}"#),
    ("grant_free", r#"{"n_frames": 200}"#),
    ("coordinated", r#"{"n_frames": 200}"#),
    ("grant_based", r#"{"n_trials": 20000}"#),
    ("minislot", r#"{"n_slots": 2000}"#),
];

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (scenario, params) in SMALL_CONFIGS {
        let config = tmp.path().join(format!("{scenario}.json"));
        let body = format!(r#"{{"scenario": "{scenario}", "master_seed": 7, "params": {params}}}"#);
        std::fs::write(&config, body).map_err(|e| e.to_string())?;
        let runs: Vec<Vec<(String, Vec<u8>)>> = [("1", "a"), ("1", "b"), ("4", "c")]
            .iter()
            .map(|(jobs, tag)| {
                let out = tmp.path().join(format!("{scenario}-{tag}"));
                let status = Command::new(env!("CARGO_BIN_EXE_urllc"))
                    .args(["--jobs", jobs, "run", "--config"])
                    .arg(&config)
                    .arg("--out")
                    .arg(&out)
                    .output()
                    .map_err(|e| e.to_string())?;
                ensure(status.status.success(), || {
                    format!("{scenario}: {}", String::from_utf8_lossy(&status.stderr).trim())
                })?;
                Ok(csv_bytes(&out))
            })
            .collect::<Result<_, String>>()?;
        ensure(!runs[0].is_empty(), || format!("{scenario} wrote no CSV"))?;
        ensure(runs[0] == runs[1], || format!("{scenario}: two runs differ"))?;
        ensure(runs[0] == runs[2], || format!("{scenario}: --jobs 1 and --jobs 4 differ"))?;
        files += runs[0].len();
    }
    Ok(format!("{} scenarios, {files} CSVs byte-identical across 3 runs", SMALL_CONFIGS.len()))
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Verdict,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "reliability_algebra", limit: secs(1), check: algebra },
        Criterion { name: "fbl_limits", limit: secs(5), check: fbl_limits },
        Criterion { name: "frame_designer", limit: secs(10), check: frame_designer },
        Criterion { name: "slotted_aloha_oracle", limit: secs(10), check: slotted_aloha },
        Criterion { name: "sic_bruteforce_equivalence", limit: secs(30), check: sic_equivalence },
        Criterion { name: "simo_sign_structure", limit: secs(120), check: simo_sign_structure },
        Criterion { name: "pd_dominance", limit: secs(5), check: pd_dominance },
        Criterion { name: "minislot_control_and_tail", limit: secs(30), check: minislot },
        Criterion { name: "densification_trend", limit: secs(180), check: densification },
        Criterion { name: "determinism", limit: None, check: determinism },
    ];
    // `cargo test -- <filter>` style selection; libtest flags are ignored
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria.iter().filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str()))) {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(c.check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let slow = c.limit.is_some_and(|l| took > l);
        let limit = c.limit.map_or("none".to_string(), |l| format!("{}s", l.as_secs()));
        let timing = format!("{:.2}s, limit {limit}", took.as_secs_f64());
        ran += 1;
        match verdict {
            Ok(detail) if !slow => println!("PASS {}: {detail} [{timing}]", c.name),
            Ok(detail) => {
                failed += 1;
                println!("FAIL {}: over time budget; {detail} [{timing}]", c.name);
            }
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {why} [{timing}]", c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
