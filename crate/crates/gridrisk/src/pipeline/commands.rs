//! The four pipeline commands.
//!
//! Exit-code contract (mapped by the binary via [`PipelineError::exit_code`]):
//! 0 success, 1 validation/input error, 2 solver or evolution failure,
//! 3 mitigation terminated without clearing (stalled or iteration budget).

use std::path::{Path, PathBuf};

use thiserror::Error;

use super::csvio::{
    read_scenarios_csv, read_thresholds_csv, write_atomic, write_mitigation_csv,
    write_reference_csv, write_risk_csv, write_scenarios_csv, write_subgradients_csv,
    write_traces_csv,
};
use super::manifest::{read_manifest, write_manifest};
use super::{load_system, sig6, RunConfig, ThresholdSpec};
use crate::dispatch::{build_longterm_reference, evolve_all, DispatchError, EvolutionParams};
use crate::risk::{
    assess, compute_subgradients, mitigate, MitigationParams, RiskError, StopReason,
};
use crate::scenario::{generate_representative, ScenarioError, ScenarioSet, SeriesKind};
use crate::system::{compute_shift_factors, validate_system, PowerSystem, SystemError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}, line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("missing artifact {path} (run `{needed_by}` first)")]
    MissingArtifact { path: PathBuf, needed_by: String },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("solver/evolution failure: {0}")]
    Dispatch(#[from] DispatchError),
    #[error("risk assessment failure: {0}")]
    Risk(RiskError),
    #[error("mitigation terminated without clearing: {reason}")]
    NotCleared { reason: &'static str },
}

impl From<RiskError> for PipelineError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Dispatch(d) => PipelineError::Dispatch(d),
            other => PipelineError::Risk(other),
        }
    }
}

impl PipelineError {
    /// 1 validation, 2 solver/evolution, 3 mitigation not cleared.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Dispatch(_) => 2,
            PipelineError::NotCleared { .. } => 3,
            _ => 1,
        }
    }
}

/// Runs `body` inside a rayon pool of the configured size (0 = default).
fn with_pool<T>(
    jobs: usize,
    body: impl FnOnce() -> Result<T, PipelineError> + Send,
) -> Result<T, PipelineError>
where
    T: Send,
{
    if jobs == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| PipelineError::Config {
                path: PathBuf::from("<jobs>"),
                message: e.to_string(),
            })?;
        pool.install(body)
    }
}

fn load_validated_system(config: &RunConfig) -> Result<PowerSystem, PipelineError> {
    let sys = load_system(&config.system)?;
    Ok(validate_system(sys)?)
}

fn resolve_thresholds(config: &RunConfig, horizon: usize) -> Result<Vec<f64>, PipelineError> {
    match &config.threshold {
        ThresholdSpec::Flat(v) => Ok(vec![*v; horizon]),
        ThresholdSpec::File { file } => read_thresholds_csv(file, horizon),
    }
}

fn evolution_params(config: &RunConfig) -> EvolutionParams {
    EvolutionParams {
        window: config.delta_r,
        omega_rt: config.omega_rt,
        gap_tol: config.gap_tol,
    }
}

/// Per-scenario net load (total demand minus available renewables) extremes,
/// for the generation summary.
fn net_load_extremes(set: &ScenarioSet) -> (f64, f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for scen in &set.data {
        for t in 0..set.horizon() {
            let mut net = 0.0;
            for (r, series) in scen.iter().enumerate() {
                match set.sources[r].kind {
                    SeriesKind::Ld => net += series[t],
                    SeriesKind::Re => net -= series[t],
                }
            }
            lo = lo.min(net);
            hi = hi.max(net);
            sum += net;
            count += 1;
        }
    }
    (lo, sum / count.max(1) as f64, hi)
}

fn print_series_stats(label: &str, set: &ScenarioSet) {
    println!(
        "{label}: {} scenarios x {} periods",
        set.n_scenarios(),
        set.horizon()
    );
    for (r, src) in set.sources.iter().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut n = 0usize;
        for scen in &set.data {
            for &v in &scen[r] {
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v;
                n += 1;
            }
        }
        println!(
            "  {:<12} mean {:>12} min {:>12} max {:>12}",
            src.id,
            sig6(sum / n.max(1) as f64),
            sig6(lo),
            sig6(hi)
        );
    }
    let (lo, mean, hi) = net_load_extremes(set);
    println!(
        "  net load     mean {:>12} min {:>12} max {:>12}",
        sig6(mean),
        sig6(lo),
        sig6(hi)
    );
}

/// Generates the representative scenario set from historical records and
/// persists it with a manifest.
pub fn cmd_generate_scenarios(config: &RunConfig) -> Result<(), PipelineError> {
    let sys = load_validated_system(config)?;
    let history_path = config
        .history
        .as_ref()
        .ok_or_else(|| PipelineError::Config {
            path: config.system.clone(),
            message: "config field 'history' is required for generate-scenarios".into(),
        })?;
    let hist = read_scenarios_csv(history_path, &sys)?;
    let rep = with_pool(config.jobs, || {
        Ok(generate_representative(
            &hist,
            config.n_rep,
            config.block_len,
            config.seed,
        )?)
    })?;

    let out = config.out_dir.join("scenarios.csv");
    write_scenarios_csv(&out, &rep)?;
    write_manifest(
        &config.out_dir.join("scenarios_manifest.json"),
        "generate-scenarios",
        config,
        &[&config.system, history_path],
    )?;

    print_series_stats("historical", &hist);
    print_series_stats("representative", &rep);
    println!("wrote {}", out.display());
    Ok(())
}

fn require_scenarios(config: &RunConfig, sys: &PowerSystem) -> Result<ScenarioSet, PipelineError> {
    let path = config.out_dir.join("scenarios.csv");
    if !path.exists() {
        return Err(PipelineError::MissingArtifact {
            path,
            needed_by: "generate-scenarios".into(),
        });
    }
    read_scenarios_csv(&path, sys)
}

/// Builds the long-term reference, evolves every scenario, assesses the
/// per-period tail risk and persists traces, risk profile, reference and
/// flagged-period subgradients.
pub fn cmd_assess(config: &RunConfig) -> Result<(), PipelineError> {
    let sys = load_validated_system(config)?;
    let sf = compute_shift_factors(&sys)?;
    let rep = require_scenarios(config, &sys)?;
    let thresholds = resolve_thresholds(config, rep.horizon())?;
    let params = evolution_params(config);

    let (reference, outcome, profile) = with_pool(config.jobs, || {
        let reference = build_longterm_reference(&sys, &sf, &rep)?;
        let outcome = evolve_all(&sys, &sf, &rep, &reference, &params)?;
        let profile = assess(&outcome.traces, config.alpha, &thresholds)?;
        Ok((reference, outcome, profile))
    })?;
    let field = compute_subgradients(&outcome.traces, &reference, config.omega_rt, &profile);

    write_reference_csv(&config.out_dir.join("reference.csv"), &sys, &reference)?;
    write_traces_csv(&config.out_dir.join("traces.csv"), &sys, &outcome.traces)?;
    write_risk_csv(&config.out_dir.join("risk.csv"), &profile)?;
    write_subgradients_csv(
        &config.out_dir.join("subgradients.csv"),
        &sys,
        &profile,
        &field,
    )?;
    let mut inputs: Vec<&Path> = vec![&config.system];
    let scen_path = config.out_dir.join("scenarios.csv");
    inputs.push(&scen_path);
    write_manifest(
        &config.out_dir.join("assess_manifest.json"),
        "assess",
        config,
        &inputs,
    )?;

    if !outcome.aborted.is_empty() {
        for (s, err) in &outcome.aborted {
            eprintln!("scenario {s} aborted: {err}");
        }
    }
    println!(
        "assessed {} scenarios over {} periods: {} flagged, max CVaR {}",
        outcome.traces.len(),
        profile.horizon(),
        profile.flagged_count(),
        sig6(profile.max_cvar())
    );
    Ok(())
}

/// Runs the mitigation loop and persists the iteration log, per-iteration
/// references, final reference and final risk profile. Returns an error
/// (exit code 3) when the loop terminates without clearing; the reports are
/// written either way.
pub fn cmd_mitigate(config: &RunConfig) -> Result<(), PipelineError> {
    let sys = load_validated_system(config)?;
    let sf = compute_shift_factors(&sys)?;
    let rep = require_scenarios(config, &sys)?;
    let thresholds = resolve_thresholds(config, rep.horizon())?;
    let params = MitigationParams {
        alpha: config.alpha,
        thresholds,
        eta0: config.eta0,
        max_iter: config.max_iter,
        evolution: evolution_params(config),
    };

    let report = with_pool(config.jobs, || {
        let initial = build_longterm_reference(&sys, &sf, &rep)?;
        Ok(mitigate(&sys, &sf, &rep, initial, &params)?)
    })?;

    write_mitigation_csv(&config.out_dir.join("mitigation.csv"), &report)?;
    for step in &report.steps {
        write_reference_csv(
            &config
                .out_dir
                .join(format!("refs/iter_{:03}.csv", step.iteration)),
            &sys,
            &step.reference,
        )?;
    }
    write_reference_csv(
        &config.out_dir.join("final_reference.csv"),
        &sys,
        &report.reference,
    )?;
    write_risk_csv(&config.out_dir.join("final_risk.csv"), &report.profile)?;
    write_manifest(
        &config.out_dir.join("mitigate_manifest.json"),
        "mitigate",
        config,
        &[&config.system],
    )?;

    println!(
        "mitigation: {} iterations, initial max CVaR {} ({} flagged) -> final {} ({} flagged)",
        report.iterations(),
        sig6(report.initial_max_cvar),
        report.initial_flagged,
        sig6(report.profile.max_cvar()),
        report.profile.flagged_count()
    );
    match report.stop {
        StopReason::Cleared => {
            println!("cleared");
            Ok(())
        }
        StopReason::MaxIter => Err(PipelineError::NotCleared {
            reason: "iteration budget exhausted",
        }),
        StopReason::Stalled => Err(PipelineError::NotCleared { reason: "stalled" }),
    }
}

/// Merges manifests and prior outputs into one human-readable summary plus
/// plot-ready long-format CSVs.
pub fn cmd_report(config: &RunConfig) -> Result<(), PipelineError> {
    let out = &config.out_dir;
    let risk_path = out.join("risk.csv");
    if !risk_path.exists() {
        return Err(PipelineError::MissingArtifact {
            path: risk_path,
            needed_by: "assess".into(),
        });
    }

    let mut text = String::from("gridrisk run report\n===================\n");
    for name in [
        "scenarios_manifest.json",
        "assess_manifest.json",
        "mitigate_manifest.json",
    ] {
        let p = out.join(name);
        if p.exists() {
            let m = read_manifest(&p)?;
            text.push_str(&format!(
                "{}: seed {}, tool {} {}\n",
                m.command, m.seed, m.tool, m.version
            ));
        }
    }

    // Assess summary from risk.csv.
    let assess_rows = read_simple_csv(&risk_path)?;
    let flagged = assess_rows
        .iter()
        .filter(|r| r.get(4).map(|v| v == "true").unwrap_or(false))
        .count();
    let max_cvar = assess_rows
        .iter()
        .filter_map(|r| r.get(2).and_then(|v| v.parse::<f64>().ok()))
        .fold(f64::NEG_INFINITY, f64::max);
    text.push_str(&format!(
        "assessment: {} periods, {} flagged, max CVaR {}\n",
        assess_rows.len(),
        flagged,
        sig6(max_cvar)
    ));

    // Plot-ready long format: stage,period,var,cvar,threshold,flag.
    let mut plot_risk = String::from("stage,period,var,cvar,threshold,flag\n");
    for r in &assess_rows {
        plot_risk.push_str(&format!("assess,{}\n", r.join(",")));
    }

    let final_risk = out.join("final_risk.csv");
    if final_risk.exists() {
        let rows = read_simple_csv(&final_risk)?;
        let flagged = rows
            .iter()
            .filter(|r| r.get(4).map(|v| v == "true").unwrap_or(false))
            .count();
        text.push_str(&format!("after mitigation: {flagged} flagged\n"));
        for r in &rows {
            plot_risk.push_str(&format!("mitigated,{}\n", r.join(",")));
        }
    }

    let mitigation = out.join("mitigation.csv");
    if mitigation.exists() {
        let rows = read_simple_csv(&mitigation)?;
        text.push_str("mitigation iterations (step, max CVaR, flagged, accepted):\n");
        for r in &rows {
            text.push_str(&format!(
                "  #{}: {} {} {} {}\n",
                r.first().cloned().unwrap_or_default(),
                r.get(1).cloned().unwrap_or_default(),
                r.get(2)
                    .and_then(|v| v.parse::<f64>().ok())
                    .map(sig6)
                    .unwrap_or_default(),
                r.get(3).cloned().unwrap_or_default(),
                r.get(4).cloned().unwrap_or_default(),
            ));
        }
    }

    // References, long format: stage,period,column,soc.
    let mut plot_ref = String::from("stage,period,series,soc\n");
    for (stage, file) in [
        ("assess", "reference.csv"),
        ("mitigated", "final_reference.csv"),
    ] {
        let p = out.join(file);
        if !p.exists() {
            continue;
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(&p)
            .map_err(|e| PipelineError::Io {
                path: p.clone(),
                message: e.to_string(),
            })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| PipelineError::Io {
                path: p.clone(),
                message: e.to_string(),
            })?
            .iter()
            .map(|s| s.to_string())
            .collect();
        for record in reader.records() {
            let record = record.map_err(|e| PipelineError::Io {
                path: p.clone(),
                message: e.to_string(),
            })?;
            let period = record.get(0).unwrap_or_default();
            for (col, header) in headers.iter().enumerate().skip(1) {
                plot_ref.push_str(&format!(
                    "{stage},{period},{header},{}\n",
                    record.get(col).unwrap_or_default()
                ));
            }
        }
    }

    write_atomic(&out.join("report.txt"), text.as_bytes())?;
    write_atomic(&out.join("plot_risk.csv"), plot_risk.as_bytes())?;
    write_atomic(&out.join("plot_reference.csv"), plot_ref.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn read_simple_csv(path: &Path) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    Ok(rows)
}
