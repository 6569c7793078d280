//! Experiment configuration: one JSON document per run.
//!
//! Every parameter block rejects unknown keys and fills omitted ones with
//! defaults, so `{"scenario": "grant_free", "params": {}}` is a complete
//! config. Validation happens entirely before any simulation starts.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use urllc_core::access::{AssignStrategy, ReceiverModel};
use urllc_core::diversity::TraceModel;
use urllc_core::frame::MessageSpec;
use urllc_core::minislot::{RadioTimeline, MAX_MINISLOT};
use urllc_core::topology::{DensityMode, RadioParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    LatencyCdf,
    FrameTradeoff,
    SimoHeatmap,
    PdInterfaces,
    Densification,
    GrantFree,
    Coordinated,
    GrantBased,
    Minislot,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 9] = [
        ScenarioId::LatencyCdf,
        ScenarioId::FrameTradeoff,
        ScenarioId::SimoHeatmap,
        ScenarioId::PdInterfaces,
        ScenarioId::Densification,
        ScenarioId::GrantFree,
        ScenarioId::Coordinated,
        ScenarioId::GrantBased,
        ScenarioId::Minislot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::LatencyCdf => "latency_cdf",
            ScenarioId::FrameTradeoff => "frame_tradeoff",
            ScenarioId::SimoHeatmap => "simo_heatmap",
            ScenarioId::PdInterfaces => "pd_interfaces",
            ScenarioId::Densification => "densification",
            ScenarioId::GrantFree => "grant_free",
            ScenarioId::Coordinated => "coordinated",
            ScenarioId::GrantBased => "grant_based",
            ScenarioId::Minislot => "minislot",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioId,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: Value,
    /// Directory relative paths inside `params` are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(path: &str, msg: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{path}: {msg}"))
}

fn parse_at<T: DeserializeOwned>(value: &Value, prefix: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        invalid(&path, e.into_inner())
    })
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "config" } else { &path }, e.into_inner())
        })?;
        if cfg.params.is_null() {
            cfg.params = Value::Object(Default::default());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        cfg.base_dir = std::fs::canonicalize(parent).unwrap_or_else(|_| parent.to_path_buf());
        Ok(cfg)
    }

    /// Parses and validates the parameter block of the selected scenario.
    pub fn typed_params(&self) -> CliResult<Params> {
        let v = &self.params;
        let p = match self.scenario {
            ScenarioId::LatencyCdf => Params::LatencyCdf(parse_at(v, "params")?),
            ScenarioId::FrameTradeoff => Params::FrameTradeoff(parse_at(v, "params")?),
            ScenarioId::SimoHeatmap => Params::SimoHeatmap(parse_at(v, "params")?),
            ScenarioId::PdInterfaces => {
                let mut p: PdParams = parse_at(v, "params")?;
                for t in &mut p.traces {
                    if t.is_relative() {
                        *t = self.base_dir.join(&*t);
                    }
                }
                Params::PdInterfaces(p)
            }
            ScenarioId::Densification => Params::Densification(parse_at(v, "params")?),
            ScenarioId::GrantFree => Params::GrantFree(parse_at(v, "params")?),
            ScenarioId::Coordinated => Params::Coordinated(parse_at(v, "params")?),
            ScenarioId::GrantBased => Params::GrantBased(parse_at(v, "params")?),
            ScenarioId::Minislot => Params::Minislot(parse_at(v, "params")?),
        };
        p.validate()?;
        Ok(p)
    }

    /// The config with every default spelled out, as echoed in manifests.
    pub fn resolved(&self) -> CliResult<ExperimentConfig> {
        let params = self.typed_params()?.to_value();
        Ok(ExperimentConfig { params, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    LatencyCdf(LatencyCdfParams),
    FrameTradeoff(FrameTradeoffParams),
    SimoHeatmap(SimoHeatmapParams),
    PdInterfaces(PdParams),
    Densification(DensificationParams),
    GrantFree(GrantFreeParams),
    Coordinated(CoordinatedParams),
    GrantBased(GrantBasedParams),
    Minislot(MinislotParams),
}

impl Params {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("parameters serialize")
    }

    pub fn validate(&self) -> CliResult<()> {
        match self {
            Params::LatencyCdf(p) => p.validate(),
            Params::FrameTradeoff(p) => p.validate(),
            Params::SimoHeatmap(p) => p.validate(),
            Params::PdInterfaces(p) => p.validate(),
            Params::Densification(p) => p.validate(),
            Params::GrantFree(p) => p.validate(),
            Params::Coordinated(p) => p.validate(),
            Params::GrantBased(p) => p.validate(),
            Params::Minislot(p) => p.validate(),
        }
    }
}

fn check(cond: bool, path: &str, msg: &str) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(path, msg))
    }
}

fn check_prob(p: f64, path: &str) -> CliResult<()> {
    check((0.0..=1.0).contains(&p), path, "must lie in [0, 1]")
}

fn check_open_prob(p: f64, path: &str) -> CliResult<()> {
    check(p > 0.0 && p < 1.0, path, "must lie in (0, 1)")
}

fn check_positive(x: f64, path: &str) -> CliResult<()> {
    check(x > 0.0 && x.is_finite(), path, "must be finite and > 0")
}

/// Log-spaced evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridParams {
    fn validate(&self, path: &str) -> CliResult<()> {
        check_positive(self.lo, &format!("{path}.lo"))?;
        check(self.hi > self.lo && self.hi.is_finite(), &format!("{path}.hi"), "must exceed lo")?;
        check(self.points >= 2, &format!("{path}.points"), "must be >= 2")
    }

    pub fn values(&self) -> Vec<f64> {
        urllc_core::reliability::log_grid(self.lo, self.hi, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverParams {
    pub mpr_gamma: usize,
    pub sic: bool,
    pub combining: bool,
    pub per_replica_success: f64,
}

impl Default for ReceiverParams {
    fn default() -> Self {
        ReceiverParams { mpr_gamma: 1, sic: true, combining: false, per_replica_success: 1.0 }
    }
}

impl ReceiverParams {
    pub fn model(&self) -> ReceiverModel {
        ReceiverModel {
            mpr_gamma: self.mpr_gamma,
            sic_enabled: self.sic,
            combining_enabled: self.combining,
            per_replica_success: self.per_replica_success,
        }
    }

    fn validate(&self, path: &str) -> CliResult<()> {
        check(self.mpr_gamma >= 1, &format!("{path}.mpr_gamma"), "must be >= 1")?;
        check_prob(self.per_replica_success, &format!("{path}.per_replica_success"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepParams {
    pub p_aux: f64,
    pub p_meta: f64,
    pub p_data: f64,
    pub duration_s: f64,
    pub max_attempts: u32,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams { p_aux: 0.999, p_meta: 0.999, p_data: 0.99, duration_s: 0.5e-3, max_attempts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyCdfParams {
    pub steps: Vec<StepParams>,
    pub n_trials: u64,
    pub deadlines: GridParams,
}

impl Default for LatencyCdfParams {
    fn default() -> Self {
        LatencyCdfParams {
            steps: vec![StepParams::default(); 3],
            n_trials: 100_000,
            deadlines: GridParams { lo: 1e-4, hi: 1e-2, points: 60 },
        }
    }
}

impl LatencyCdfParams {
    fn validate(&self) -> CliResult<()> {
        check(!self.steps.is_empty(), "params.steps", "needs at least one step")?;
        for (i, s) in self.steps.iter().enumerate() {
            let p = format!("params.steps.{i}");
            check_prob(s.p_aux, &format!("{p}.p_aux"))?;
            check_prob(s.p_meta, &format!("{p}.p_meta"))?;
            check_prob(s.p_data, &format!("{p}.p_data"))?;
            check_positive(s.duration_s, &format!("{p}.duration_s"))?;
            check(s.max_attempts >= 1, &format!("{p}.max_attempts"), "must be >= 1")?;
        }
        check(self.n_trials >= 1, "params.n_trials", "must be >= 1")?;
        self.deadlines.validate("params.deadlines")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HeaderParams {
    UnionSplit,
    Disabled,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionSet {
    /// Every set partition of the messages.
    All,
    /// Consecutive blocks of every size from 1 to n.
    Contiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageParams {
    pub b_bits: u64,
    pub epsilon_target: f64,
}

pub const MAX_ALL_PARTITIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameTradeoffParams {
    pub snr_db: f64,
    pub messages: Vec<MessageParams>,
    pub header: HeaderParams,
    pub partitions: PartitionSet,
}

impl Default for FrameTradeoffParams {
    fn default() -> Self {
        FrameTradeoffParams {
            snr_db: 0.0,
            messages: vec![MessageParams { b_bits: 256, epsilon_target: 1e-5 }; 4],
            header: HeaderParams::UnionSplit,
            partitions: PartitionSet::All,
        }
    }
}

impl FrameTradeoffParams {
    pub fn message_specs(&self) -> CliResult<Vec<MessageSpec>> {
        self.messages
            .iter()
            .enumerate()
            .map(|(i, m)| {
                MessageSpec::new(i as u32, m.b_bits, m.epsilon_target)
                    .map_err(|e| invalid(&format!("params.messages.{i}"), e))
            })
            .collect()
    }

    fn validate(&self) -> CliResult<()> {
        check(self.snr_db.is_finite(), "params.snr_db", "must be finite")?;
        check(!self.messages.is_empty(), "params.messages", "needs at least one message")?;
        let specs = self.message_specs()?;
        if let HeaderParams::Fixed(e) = self.header {
            check_open_prob(e, "params.header.fixed")?;
            let tightest = specs.iter().map(|m| m.epsilon_target).fold(1.0, f64::min);
            check(e < tightest, "params.header.fixed", "must be below every message target")?;
        }
        if self.partitions == PartitionSet::All {
            check(
                self.messages.len() <= MAX_ALL_PARTITIONS,
                "params.partitions",
                "\"all\" is limited to 8 messages; use \"contiguous\"",
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimoHeatmapParams {
    pub snr_grid_db: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub m_antennas: usize,
    pub levels: usize,
    pub trials: u64,
    pub interference_power: f64,
}

impl Default for SimoHeatmapParams {
    fn default() -> Self {
        SimoHeatmapParams {
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            sigma_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            m_antennas: urllc_core::simo::DEFAULT_ANTENNAS,
            levels: 2,
            trials: 5000,
            interference_power: 0.0,
        }
    }
}

impl SimoHeatmapParams {
    fn validate(&self) -> CliResult<()> {
        check(!self.snr_grid_db.is_empty(), "params.snr_grid_db", "must be non-empty")?;
        check(self.snr_grid_db.iter().all(|x| x.is_finite()), "params.snr_grid_db", "must be finite")?;
        check(!self.sigma_grid.is_empty(), "params.sigma_grid", "must be non-empty")?;
        check(self.sigma_grid.iter().all(|s| (0.0..=1.0).contains(s)), "params.sigma_grid", "values must lie in [0, 1]")?;
        check(self.m_antennas >= 1, "params.m_antennas", "must be >= 1")?;
        check(self.levels >= 2, "params.levels", "must be >= 2")?;
        check(self.trials >= 1, "params.trials", "must be >= 1")?;
        check(self.interference_power >= 0.0 && self.interference_power.is_finite(), "params.interference_power", "must be >= 0")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthTraceParams {
    pub name: String,
    pub model: TraceModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdConfigParams {
    pub name: String,
    pub interfaces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdParams {
    /// Trace CSV files; when given, `synthetic` is ignored.
    pub traces: Vec<PathBuf>,
    pub synthetic: Vec<SynthTraceParams>,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Defaults to every non-empty subset of the interfaces.
    pub configs: Option<Vec<PdConfigParams>>,
    pub deadlines: GridParams,
    pub align_tolerance_s: f64,
}

fn trace_model(median: f64, sigma: f64, spike_weight: f64, spike_scale: f64, shape: f64, loss: f64) -> TraceModel {
    TraceModel {
        base_median_ms: median,
        base_sigma: sigma,
        spike_weight,
        spike_scale_ms: spike_scale,
        spike_shape: shape,
        loss_prob: loss,
    }
}

impl Default for PdParams {
    fn default() -> Self {
        PdParams {
            traces: Vec::new(),
            synthetic: vec![
                SynthTraceParams { name: "lte".into(), model: trace_model(28.0, 0.25, 0.03, 60.0, 1.8, 0.004) },
                SynthTraceParams { name: "hspa".into(), model: trace_model(45.0, 0.35, 0.05, 90.0, 1.6, 0.008) },
                SynthTraceParams { name: "wifi".into(), model: trace_model(6.0, 0.6, 0.02, 40.0, 1.3, 0.015) },
            ],
            duration_s: 600.0,
            rate_hz: 100.0,
            configs: None,
            deadlines: GridParams { lo: 1e-3, hi: 2.0, points: 80 },
            align_tolerance_s: urllc_core::diversity::DEFAULT_ALIGN_TOLERANCE_S,
        }
    }
}

impl PdParams {
    pub fn interface_names(&self) -> Vec<String> {
        if self.traces.is_empty() {
            self.synthetic.iter().map(|s| s.name.clone()).collect()
        } else {
            self.traces
                .iter()
                .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
                .collect()
        }
    }

    fn validate(&self) -> CliResult<()> {
        if self.traces.is_empty() {
            check(!self.synthetic.is_empty(), "params.synthetic", "needs traces or synthetic models")?;
            for (i, s) in self.synthetic.iter().enumerate() {
                s.model.validate().map_err(|e| invalid(&format!("params.synthetic.{i}.model"), e))?;
            }
            check_positive(self.duration_s, "params.duration_s")?;
            check_positive(self.rate_hz, "params.rate_hz")?;
        } else {
            for (i, t) in self.traces.iter().enumerate() {
                check(t.is_file(), &format!("params.traces.{i}"), "file does not exist")?;
            }
        }
        let names = self.interface_names();
        for (i, n) in names.iter().enumerate() {
            check(!n.is_empty() && !names[..i].contains(n), "params", "interface names must be non-empty and unique")?;
        }
        if let Some(cfgs) = &self.configs {
            check(!cfgs.is_empty(), "params.configs", "must be non-empty")?;
            for (i, c) in cfgs.iter().enumerate() {
                let p = format!("params.configs.{i}.interfaces");
                check(!c.interfaces.is_empty(), &p, "must name at least one interface")?;
                check(c.interfaces.iter().all(|x| names.contains(x)), &p, "names an unknown interface")?;
            }
        }
        check_positive(self.align_tolerance_s, "params.align_tolerance_s")?;
        self.deadlines.validate("params.deadlines")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensificationParams {
    pub payload_bits: f64,
    pub lambda_bs: Vec<f64>,
    pub lambda_u: f64,
    pub area_side: f64,
    pub radio: RadioParams,
    pub replications: usize,
    pub modes: Vec<DensityMode>,
}

impl Default for DensificationParams {
    fn default() -> Self {
        DensificationParams {
            payload_bits: 1e4,
            lambda_bs: vec![0.1, 0.15, 0.2, 0.3, 0.5],
            lambda_u: 0.01,
            area_side: 100.0,
            radio: RadioParams { pathloss_exponent: 4.0, tx_power: 1.0, noise_power: 1e-10, bandwidth: 1e6 },
            replications: 200,
            modes: vec![DensityMode::Baseline, DensityMode::Cooperation],
        }
    }
}

impl DensificationParams {
    fn validate(&self) -> CliResult<()> {
        check_positive(self.payload_bits, "params.payload_bits")?;
        check(!self.lambda_bs.is_empty(), "params.lambda_bs", "must be non-empty")?;
        for (i, &l) in self.lambda_bs.iter().enumerate() {
            check_positive(l, &format!("params.lambda_bs.{i}"))?;
        }
        check_positive(self.lambda_u, "params.lambda_u")?;
        check_positive(self.area_side, "params.area_side")?;
        self.radio.validate().map_err(|e| invalid("params.radio", e))?;
        check(self.replications >= 1, "params.replications", "must be >= 1")?;
        check(!self.modes.is_empty(), "params.modes", "must be non-empty")
    }
}

fn check_access(
    activation_prob: f64,
    k_replicas: usize,
    frame_len: usize,
    n_frames: u64,
    slot_duration: f64,
    receiver: &ReceiverParams,
    deadlines: &Option<GridParams>,
) -> CliResult<()> {
    check_prob(activation_prob, "params.activation_prob")?;
    check(frame_len >= 1, "params.frame_len", "must be >= 1")?;
    check(k_replicas >= 1 && k_replicas <= frame_len, "params.k_replicas", "must lie in 1..=frame_len")?;
    check(n_frames >= 1, "params.n_frames", "must be >= 1")?;
    check_positive(slot_duration, "params.slot_duration")?;
    receiver.validate("params.receiver")?;
    if let Some(d) = deadlines {
        d.validate("params.deadlines")?;
    }
    Ok(())
}

/// Deadline grid covering one slot to one frame.
pub fn frame_deadlines(slot_duration: f64, frame_len: usize) -> GridParams {
    let hi = slot_duration * frame_len.max(2) as f64;
    GridParams { lo: slot_duration, hi, points: 40 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrantFreeParams {
    pub n_devices: usize,
    pub activation_prob: f64,
    pub k_replicas: usize,
    pub frame_len: usize,
    pub n_frames: u64,
    pub slot_duration: f64,
    pub receiver: ReceiverParams,
    pub deadlines: Option<GridParams>,
}

impl Default for GrantFreeParams {
    fn default() -> Self {
        GrantFreeParams {
            n_devices: 200,
            activation_prob: 0.05,
            k_replicas: 2,
            frame_len: 50,
            n_frames: 1000,
            slot_duration: 1.25e-4,
            receiver: ReceiverParams::default(),
            deadlines: None,
        }
    }
}

impl GrantFreeParams {
    fn validate(&self) -> CliResult<()> {
        check_access(
            self.activation_prob,
            self.k_replicas,
            self.frame_len,
            self.n_frames,
            self.slot_duration,
            &self.receiver,
            &self.deadlines,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoordinatedParams {
    pub n_devices: usize,
    pub k_replicas: usize,
    pub strategy: AssignStrategy,
    pub activation_prob: f64,
    pub frame_len: usize,
    pub n_frames: u64,
    pub slot_duration: f64,
    pub receiver: ReceiverParams,
    pub deadlines: Option<GridParams>,
}

impl Default for CoordinatedParams {
    fn default() -> Self {
        CoordinatedParams {
            n_devices: 20,
            k_replicas: 2,
            strategy: AssignStrategy::OrthogonalFirst,
            activation_prob: 0.3,
            frame_len: 40,
            n_frames: 1000,
            slot_duration: 1.25e-4,
            receiver: ReceiverParams::default(),
            deadlines: None,
        }
    }
}

impl CoordinatedParams {
    fn validate(&self) -> CliResult<()> {
        check_access(
            self.activation_prob,
            self.k_replicas,
            self.frame_len,
            self.n_frames,
            self.slot_duration,
            &self.receiver,
            &self.deadlines,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrantBasedParams {
    pub steps: Vec<f64>,
    pub round_trip_slots: Vec<u64>,
    pub slot_duration: f64,
    pub n_trials: u64,
    pub deadlines: Option<GridParams>,
}

impl Default for GrantBasedParams {
    fn default() -> Self {
        GrantBasedParams {
            steps: vec![0.99, 0.99, 0.99],
            round_trip_slots: vec![2, 2, 2],
            slot_duration: 1.25e-4,
            n_trials: 100_000,
            deadlines: None,
        }
    }
}

impl GrantBasedParams {
    fn validate(&self) -> CliResult<()> {
        check(!self.steps.is_empty(), "params.steps", "needs at least one step")?;
        for (i, &p) in self.steps.iter().enumerate() {
            check_prob(p, &format!("params.steps.{i}"))?;
        }
        check(
            self.round_trip_slots.len() == self.steps.len(),
            "params.round_trip_slots",
            "needs one entry per step",
        )?;
        check_positive(self.slot_duration, "params.slot_duration")?;
        check(self.n_trials >= 1, "params.n_trials", "must be >= 1")?;
        if let Some(d) = &self.deadlines {
            d.validate("params.deadlines")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinislotParams {
    pub rate_per_s: f64,
    pub size_weights: [f64; MAX_MINISLOT],
    pub n_slots: usize,
    pub control_prefix: usize,
    pub symbol_duration_s: f64,
}

impl Default for MinislotParams {
    fn default() -> Self {
        MinislotParams {
            rate_per_s: 700.0,
            size_weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            n_slots: 20_000,
            control_prefix: 1,
            symbol_duration_s: 1.0 / 14_000.0,
        }
    }
}

impl MinislotParams {
    pub fn timeline(&self) -> RadioTimeline {
        RadioTimeline { n_slots: self.n_slots, control_prefix: self.control_prefix, symbol_duration: self.symbol_duration_s }
    }

    fn validate(&self) -> CliResult<()> {
        check(self.rate_per_s >= 0.0 && self.rate_per_s.is_finite(), "params.rate_per_s", "must be finite and >= 0")?;
        check(
            self.size_weights.iter().all(|w| *w >= 0.0 && w.is_finite()) && self.size_weights.iter().sum::<f64>() > 0.0,
            "params.size_weights",
            "must be non-negative with a positive sum",
        )?;
        self.timeline().validate().map_err(|e| invalid("params", e))
    }
}
