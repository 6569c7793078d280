//! Scenario dispatch: typed parameters in, CSV bytes out.

use urllc_core::access::{
    assign_patterns, run_coordinated, run_exchange, run_grant_based, run_grant_free, write_device_csv,
    CoordinatedConfig, ExchangeStep, GrantFreeConfig,
};
use urllc_core::diversity::{align, load_trace, pd_latency, reliability_curve, synth_trace, write_pd_csv, PdConfig};
use urllc_core::frame::{contiguous_grouping, set_partitions, write_tradeoff_csv, FrameDesigner, Grouping, HeaderPolicy};
use urllc_core::minislot::{urllc_latency_cdf, write_minislot_csv, MinislotLoad};
use urllc_core::reliability::{packet_success, write_reliability_csv, LatencyCdf, ProtocolChain, StageModel};
use urllc_core::seed::derive_seed;
use urllc_core::simo::{ser_gain_heatmap, write_heatmap_csv, HeatmapSpec};
use urllc_core::topology::{latency_vs_density, write_density_csv, DensificationConfig};
use urllc_core::LinkSnr;

use crate::config::*;
use crate::error::CliResult;

/// Files of one scenario run plus a single headline number for sweep summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub metric: &'static str,
    pub value: f64,
}

fn reliability_file(cdf: &LatencyCdf, grid: &GridParams) -> CliResult<(String, Vec<u8>)> {
    let mut buf = Vec::new();
    write_reliability_csv(&mut buf, cdf, &grid.values())?;
    Ok(("reliability.csv".into(), buf))
}

fn asymptote(cdf: &LatencyCdf) -> f64 {
    cdf.reliability_at(f64::INFINITY)
}

pub fn run_scenario(params: &Params, seed: u64) -> CliResult<ScenarioOutput> {
    match params {
        Params::LatencyCdf(p) => {
            let steps = p
                .steps
                .iter()
                .map(|s| {
                    Ok(ExchangeStep {
                        success: packet_success(&StageModel::new(s.p_aux, s.p_meta, s.p_data)?),
                        duration_s: s.duration_s,
                        max_attempts: s.max_attempts,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let cdf = run_exchange(&steps, p.n_trials, seed)?;
            Ok(ScenarioOutput {
                files: vec![reliability_file(&cdf, &p.deadlines)?],
                metric: "reliability",
                value: asymptote(&cdf),
            })
        }
        Params::FrameTradeoff(p) => {
            let messages = p.message_specs()?;
            let header = match p.header {
                HeaderParams::UnionSplit => HeaderPolicy::UnionSplit,
                HeaderParams::Disabled => HeaderPolicy::Disabled,
                HeaderParams::Fixed(e) => HeaderPolicy::Fixed(e),
            };
            let designer = FrameDesigner::new(LinkSnr::from_db(p.snr_db)?, header);
            let n = messages.len();
            let partitions: Vec<Grouping> = match p.partitions {
                PartitionSet::All => set_partitions(n),
                PartitionSet::Contiguous => {
                    let mut v: Vec<Grouping> = (1..=n).map(|size| contiguous_grouping(n, size)).collect();
                    v.dedup();
                    v
                }
            };
            let curve = designer.tradeoff_curve(&messages, &partitions)?;
            let mut buf = Vec::new();
            write_tradeoff_csv(&mut buf, &curve)?;
            Ok(ScenarioOutput {
                files: vec![("tradeoff.csv".into(), buf)],
                metric: "min_total_cu",
                value: curve.first().map_or(f64::NAN, |c| c.total_cu as f64),
            })
        }
        Params::SimoHeatmap(p) => {
            let spec = HeatmapSpec {
                snr_grid_db: p.snr_grid_db.clone(),
                sigma_grid: p.sigma_grid.clone(),
                m_antennas: p.m_antennas,
                levels: p.levels,
                trials: p.trials,
                interference_power: p.interference_power,
            };
            let cells = ser_gain_heatmap(&spec, seed)?;
            let mut buf = Vec::new();
            write_heatmap_csv(&mut buf, &cells)?;
            Ok(ScenarioOutput {
                files: vec![("heatmap.csv".into(), buf)],
                metric: "max_gain_log10",
                value: cells.iter().map(|c| c.gain_log10).fold(f64::NEG_INFINITY, f64::max),
            })
        }
        Params::PdInterfaces(p) => {
            let traces = if p.traces.is_empty() {
                p.synthetic
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        synth_trace(&s.name, &s.model, p.duration_s, p.rate_hz, derive_seed(seed, "trace", i as u64))
                    })
                    .collect::<urllc_core::Result<Vec<_>>>()?
            } else {
                p.traces.iter().map(|t| load_trace(t)).collect::<urllc_core::Result<Vec<_>>>()?
            };
            let aligned = align(&traces, p.align_tolerance_s)?;
            let configs: Vec<PdConfig> = match &p.configs {
                Some(c) => c.iter().map(|c| PdConfig { name: c.name.clone(), interfaces: c.interfaces.clone() }).collect(),
                None => {
                    let names = &aligned.names;
                    (1u32..(1 << names.len()))
                        .map(|mask| {
                            let interfaces: Vec<String> = names
                                .iter()
                                .enumerate()
                                .filter(|(i, _)| mask & (1 << i) != 0)
                                .map(|(_, n)| n.clone())
                                .collect();
                            PdConfig { name: interfaces.join("+"), interfaces }
                        })
                        .collect()
                }
            };
            let grid = p.deadlines.values();
            let curves = configs
                .iter()
                .map(|c| Ok((c.name.clone(), reliability_curve(&pd_latency(&aligned, c)?, &grid)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let mut buf = Vec::new();
            write_pd_csv(&mut buf, &curves)?;
            let best = curves
                .iter()
                .filter_map(|(_, pts)| pts.last().map(|x| x.reliability))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(ScenarioOutput {
                files: vec![("pd_reliability.csv".into(), buf)],
                metric: "best_reliability_at_max_deadline",
                value: best,
            })
        }
        Params::Densification(p) => {
            let cfg = DensificationConfig {
                payload_bits: p.payload_bits,
                lambda_bs: p.lambda_bs.clone(),
                lambda_u: p.lambda_u,
                area_side: p.area_side,
                radio: p.radio,
                replications: p.replications,
            };
            let points = latency_vs_density(&cfg, &p.modes, seed)?;
            let mut buf = Vec::new();
            write_density_csv(&mut buf, &points)?;
            Ok(ScenarioOutput {
                files: vec![("densification.csv".into(), buf)],
                metric: "mean_latency_first_point_s",
                value: points.first().map_or(f64::NAN, |x| x.mean_latency_s),
            })
        }
        Params::GrantFree(p) => {
            let cfg = GrantFreeConfig {
                n_devices: p.n_devices,
                activation_prob: p.activation_prob,
                k_replicas: p.k_replicas,
                frame_len: p.frame_len,
                n_frames: p.n_frames,
                slot_duration: p.slot_duration,
                receiver: p.receiver.model(),
                record_devices: true,
            };
            let report = run_grant_free(&cfg, seed)?;
            let grid = p.deadlines.unwrap_or_else(|| frame_deadlines(p.slot_duration, p.frame_len));
            let mut devices = Vec::new();
            write_device_csv(&mut devices, &report.records)?;
            Ok(ScenarioOutput {
                files: vec![("devices.csv".into(), devices), reliability_file(&report.cdf, &grid)?],
                metric: "reliability",
                value: asymptote(&report.cdf),
            })
        }
        Params::Coordinated(p) => {
            let patterns = assign_patterns(
                p.n_devices,
                p.frame_len,
                p.k_replicas,
                p.strategy,
                derive_seed(seed, "patterns", 0),
            )?;
            let cfg = CoordinatedConfig {
                activation_prob: p.activation_prob,
                frame_len: p.frame_len,
                n_frames: p.n_frames,
                slot_duration: p.slot_duration,
                receiver: p.receiver.model(),
                record_devices: true,
            };
            let report = run_coordinated(&cfg, &patterns, derive_seed(seed, "frames", 0))?;
            let grid = p.deadlines.unwrap_or_else(|| frame_deadlines(p.slot_duration, p.frame_len));
            let mut devices = Vec::new();
            write_device_csv(&mut devices, &report.records)?;
            Ok(ScenarioOutput {
                files: vec![("devices.csv".into(), devices), reliability_file(&report.cdf, &grid)?],
                metric: "reliability",
                value: asymptote(&report.cdf),
            })
        }
        Params::GrantBased(p) => {
            let chain = ProtocolChain::new(p.steps.clone())?;
            let cdf = run_grant_based(&chain, &p.round_trip_slots, p.slot_duration, p.n_trials, seed)?;
            let total: u64 = p.round_trip_slots.iter().sum();
            let grid = p.deadlines.unwrap_or_else(|| frame_deadlines(p.slot_duration, 2 * total.max(1) as usize));
            Ok(ScenarioOutput {
                files: vec![reliability_file(&cdf, &grid)?],
                metric: "reliability",
                value: asymptote(&cdf),
            })
        }
        Params::Minislot(p) => {
            let load = MinislotLoad { rate: p.rate_per_s, size_weights: p.size_weights, timeline: p.timeline() };
            let report = urllc_latency_cdf(&load, seed)?;
            let mut buf = Vec::new();
            write_minislot_csv(&mut buf, &report)?;
            Ok(ScenarioOutput {
                files: vec![("minislot.csv".into(), buf)],
                metric: "embb_loss_fraction",
                value: report.embb_loss_fraction,
            })
        }
    }
}
