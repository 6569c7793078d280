//! `run` and `sweep` drivers on top of the scenario dispatch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use urllc_core::seed::derive_seed;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{AtomicDir, Manifest, MANIFEST_NAME};
use crate::scenarios::{run_scenario, ScenarioOutput};

pub const SWEEP_SUMMARY_NAME: &str = "sweep_summary.csv";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn out_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<PathBuf> {
    opts.out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set output_dir".into()))
}

struct Point {
    dir: AtomicDir,
    manifest: Manifest,
    output: ScenarioOutput,
}

fn run_point(cfg: &ExperimentConfig, master: u64, index: u64, out: &Path) -> CliResult<Point> {
    let params = cfg.typed_params()?;
    let point_seed = derive_seed(master, cfg.scenario.as_str(), index);
    let started = Instant::now();
    let output = run_scenario(&params, point_seed)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let mut dir = AtomicDir::create(out)?;
    let mut outputs = Vec::with_capacity(output.files.len());
    for (name, bytes) in &output.files {
        outputs.push(dir.write(name, bytes)?);
    }
    let config = ExperimentConfig {
        master_seed: master,
        output_dir: Some(out.to_path_buf()),
        params: params.to_value(),
        ..cfg.clone()
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario.to_string(),
        master_seed: master,
        point_seed,
        config,
        wall_time_s,
        outputs,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    dir.write(MANIFEST_NAME, &json)?;
    Ok(Point { dir, manifest, output })
}

/// Runs one scenario; on any failure nothing is left in the output directory.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<Manifest> {
    let out = out_dir(cfg, opts)?;
    cfg.typed_params()?;
    let master = opts.seed.unwrap_or(cfg.master_seed);
    let point = run_point(cfg, master, 0, &out)?;
    point.dir.commit();
    Ok(point.manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: u64,
    pub param: String,
    pub value: String,
    pub seed: u64,
    pub output_dir: String,
    pub metric: String,
    pub metric_value: f64,
}

/// Splits `a.b.0.c` and prefixes `params` unless the path is rooted at a top-level key.
fn path_segments(path: &str) -> CliResult<Vec<String>> {
    let segs: Vec<String> = path.split('.').map(str::to_string).collect();
    if segs.iter().any(String::is_empty) {
        return Err(CliError::Validation(format!("malformed parameter path {path:?}")));
    }
    match segs[0].as_str() {
        "params" | "master_seed" | "scenario" => Ok(segs),
        _ => Ok(std::iter::once("params".to_string()).chain(segs).collect()),
    }
}

fn set_path(root: &mut Value, segs: &[String], value: Value, display: &str) -> CliResult<()> {
    let mut cur = root;
    for s in segs {
        cur = match cur {
            Value::Object(map) => map.get_mut(s),
            Value::Array(items) => s.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::Validation(format!("parameter path {display:?} does not resolve")))?;
    }
    *cur = value;
    Ok(())
}

fn parse_value(text: &str) -> Value {
    serde_json::from_str(text.trim()).unwrap_or_else(|_| Value::String(text.trim().to_string()))
}

/// Runs one point per value. Every point is validated before the first one
/// runs; outputs land in `point_NNN/` plus a merged `sweep_summary.csv`.
pub fn sweep(cfg: &ExperimentConfig, param: &str, values: &[String], opts: &RunOptions) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Validation("sweep needs at least one value".into()));
    }
    let out = out_dir(cfg, opts)?;
    let master = opts.seed.unwrap_or(cfg.master_seed);
    let segs = path_segments(param)?;
    let base = serde_json::to_value(cfg.resolved()?).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut doc = base.clone();
        set_path(&mut doc, &segs, parse_value(v), param)?;
        let mut point = ExperimentConfig::from_json_str(&doc.to_string())?;
        point.base_dir = cfg.base_dir.clone();
        point.typed_params()?;
        configs.push(point);
    }

    let mut dirs = Vec::with_capacity(configs.len());
    let mut rows = Vec::with_capacity(configs.len());
    for (i, (point_cfg, raw)) in configs.iter().zip(values).enumerate() {
        let dir_name = format!("point_{i:03}");
        let p = run_point(point_cfg, master, i as u64, &out.join(&dir_name))?;
        rows.push(SweepRow {
            index: i as u64,
            param: param.to_string(),
            value: raw.trim().to_string(),
            seed: p.manifest.point_seed,
            output_dir: dir_name,
            metric: p.output.metric.to_string(),
            metric_value: p.output.value,
        });
        dirs.push(p.dir);
    }
    let mut summary = AtomicDir::create(&out)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    summary.write(SWEEP_SUMMARY_NAME, &bytes)?;
    summary.commit();
    dirs.into_iter().for_each(AtomicDir::commit);
    Ok(rows)
}
