//! Configuration, data ingestion/persistence and the command drivers behind
//! the `gridrisk` binary.
//!
//! A run is described by one JSON config file; paths inside it are resolved
//! relative to the config file's directory. The four commands write their
//! results as CSV files plus a JSON manifest (tool version, seed, config
//! echo, input hashes) into the configured output directory:
//!
//! * `generate-scenarios` -> `scenarios.csv`
//! * `assess` -> `reference.csv`, `traces.csv`, `risk.csv`, `subgradients.csv`
//! * `mitigate` -> `mitigation.csv`, `refs/iter_*.csv`, `final_reference.csv`,
//!   `final_risk.csv`
//! * `report` -> `report.txt`, `plot_risk.csv`, `plot_reference.csv`
//!
//! All CSVs are UTF-8 with LF line endings and are byte-identical across
//! reruns with the same inputs and seed; timestamps only appear in
//! manifests.

pub mod commands;
pub mod csvio;
pub mod manifest;

pub use commands::{cmd_assess, cmd_generate_scenarios, cmd_mitigate, cmd_report, PipelineError};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::system::{
    DrResource, LoadPoint, PowerSystem, ReKind, ReSource, SesUnit, TpgUnit, TransmissionLine,
};

/// Threshold specification: one flat value or a per-period CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSpec {
    Flat(f64),
    File { file: PathBuf },
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Flat(2e5)
    }
}

fn default_n_rep() -> usize {
    200
}
fn default_block_len() -> usize {
    365
}
fn default_alpha() -> f64 {
    0.8
}
fn default_delta_r() -> usize {
    4
}
fn default_omega_rt() -> f64 {
    10.0
}
fn default_gap_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    20
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Run configuration; defaults follow the bundled example parameterization
/// (alpha 0.8, omega_rt 10, delta_r 4, threshold 2e5 $).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: PathBuf,
    #[serde(default)]
    pub history: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_n_rep")]
    pub n_rep: usize,
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub threshold: ThresholdSpec,
    #[serde(default = "default_delta_r")]
    pub delta_r: usize,
    #[serde(default = "default_omega_rt")]
    pub omega_rt: f64,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default)]
    pub eta0: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Worker threads for scenario-parallel stages; 0 picks the default.
    #[serde(default)]
    pub jobs: usize,
}

impl RunConfig {
    /// Reads the config and resolves every contained path relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.system = base.join(&cfg.system);
        if let Some(h) = &cfg.history {
            cfg.history = Some(base.join(h));
        }
        cfg.out_dir = base.join(&cfg.out_dir);
        if let ThresholdSpec::File { file } = &cfg.threshold {
            cfg.threshold = ThresholdSpec::File {
                file: base.join(file),
            };
        }
        Ok(cfg)
    }
}

/// JSON shape of the system description; bus references are external string
/// ids resolved to dense indices on load.
#[derive(Debug, Deserialize)]
struct SystemConfig {
    buses: Vec<String>,
    #[serde(default)]
    slack_bus: Option<String>,
    #[serde(default = "one")]
    dt: f64,
    #[serde(default = "thousand")]
    cost_emergency: f64,
    #[serde(default)]
    tpg: Vec<TpgConfig>,
    #[serde(default)]
    re: Vec<ReConfig>,
    #[serde(default)]
    ses: Vec<SesConfig>,
    #[serde(default)]
    dr: Vec<DrConfig>,
    #[serde(default)]
    loads: Vec<LoadConfig>,
    #[serde(default)]
    lines: Vec<LineConfig>,
}

fn one() -> f64 {
    1.0
}
fn thousand() -> f64 {
    1000.0
}

#[derive(Debug, Deserialize)]
struct TpgConfig {
    id: String,
    bus: String,
    p_min: f64,
    p_max: f64,
    ramp_up: f64,
    ramp_down: f64,
    min_on: u32,
    min_off: u32,
    cost_energy: f64,
    cost_startup: f64,
    cost_shutdown: f64,
}

#[derive(Debug, Deserialize)]
struct ReConfig {
    id: String,
    bus: String,
    kind: String,
    capacity: f64,
}

#[derive(Debug, Deserialize)]
struct SesConfig {
    id: String,
    bus: String,
    p_cap: f64,
    e_cap: f64,
    soc_lo_frac: f64,
    soc_hi_frac: f64,
    eta_ch: f64,
    eta_dc: f64,
    e_init: f64,
    cost_throughput: f64,
}

#[derive(Debug, Deserialize)]
struct DrConfig {
    id: String,
    bus: String,
    p_cap: f64,
    cost: f64,
}

#[derive(Debug, Deserialize)]
struct LoadConfig {
    id: String,
    bus: String,
}

#[derive(Debug, Deserialize)]
struct LineConfig {
    id: String,
    from_bus: String,
    to_bus: String,
    reactance: f64,
    flow_cap: f64,
}

/// Loads and resolves the system description (without validating it; callers
/// run `validate_system` so invariant violations carry entity ids).
pub fn load_system(path: &Path) -> Result<PowerSystem, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let raw: SystemConfig = serde_json::from_str(&text).map_err(|e| PipelineError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;

    let bus_index = |name: &str| -> Result<usize, PipelineError> {
        raw.buses
            .iter()
            .position(|b| b == name)
            .ok_or_else(|| PipelineError::Config {
                path: path.to_path_buf(),
                message: format!("unknown bus id '{name}'"),
            })
    };
    let slack_bus = match &raw.slack_bus {
        Some(name) => Some(bus_index(name)?),
        None => None,
    };
    let tpg = raw
        .tpg
        .iter()
        .map(|u| {
            Ok(TpgUnit {
                id: u.id.clone(),
                p_min: u.p_min,
                p_max: u.p_max,
                ramp_up: u.ramp_up,
                ramp_down: u.ramp_down,
                min_on: u.min_on,
                min_off: u.min_off,
                cost_energy: u.cost_energy,
                cost_startup: u.cost_startup,
                cost_shutdown: u.cost_shutdown,
                bus: bus_index(&u.bus)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let re = raw
        .re
        .iter()
        .map(|r| {
            let kind = match r.kind.as_str() {
                "wind" => ReKind::Wind,
                "pv" => ReKind::Pv,
                other => {
                    return Err(PipelineError::Config {
                        path: path.to_path_buf(),
                        message: format!("re '{}': unknown kind '{other}'", r.id),
                    })
                }
            };
            Ok(ReSource {
                id: r.id.clone(),
                kind,
                capacity: r.capacity,
                bus: bus_index(&r.bus)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let ses = raw
        .ses
        .iter()
        .map(|e| {
            Ok(SesUnit {
                id: e.id.clone(),
                p_cap: e.p_cap,
                e_cap: e.e_cap,
                soc_lo_frac: e.soc_lo_frac,
                soc_hi_frac: e.soc_hi_frac,
                eta_ch: e.eta_ch,
                eta_dc: e.eta_dc,
                e_init: e.e_init,
                cost_throughput: e.cost_throughput,
                bus: bus_index(&e.bus)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let dr = raw
        .dr
        .iter()
        .map(|d| {
            Ok(DrResource {
                id: d.id.clone(),
                p_cap: d.p_cap,
                cost: d.cost,
                bus: bus_index(&d.bus)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let loads = raw
        .loads
        .iter()
        .map(|l| {
            Ok(LoadPoint {
                id: l.id.clone(),
                bus: bus_index(&l.bus)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let lines = raw
        .lines
        .iter()
        .map(|l| {
            Ok(TransmissionLine {
                id: l.id.clone(),
                from_bus: bus_index(&l.from_bus)?,
                to_bus: bus_index(&l.to_bus)?,
                reactance: l.reactance,
                flow_cap: l.flow_cap,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    Ok(PowerSystem {
        bus_ids: raw.buses,
        slack_bus,
        tpg,
        re,
        ses,
        dr,
        loads,
        lines,
        cost_emergency: raw.cost_emergency,
        dt: raw.dt,
    })
}

/// Formats a number with 6 significant digits for human-readable summaries.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 12) as usize;
    format!("{x:.decimals$}")
}
