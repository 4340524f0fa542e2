//! CSV ingestion and persistence.
//!
//! Scenario data travels in long format `scenario_id,series_id,period,
//! value_mw` (header required, UTF-8, 0-based periods). Series are
//! canonically ordered as the system's renewables followed by its loads, so
//! rewritten files are byte-stable regardless of input row order.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::PipelineError;
use crate::dispatch::{EvolutionTrace, SocReference};
use crate::risk::{MitigationReport, RiskProfile, SubgradientField};
use crate::scenario::{ScenarioSet, SeriesKind, SourceInfo};
use crate::system::PowerSystem;

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn csv_err(path: &Path, line: u64, message: impl Into<String>) -> PipelineError {
    PipelineError::Csv {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a long-format scenario CSV and aligns it with the system: every
/// renewable and load of the system must be present; unknown series ids are
/// rejected. Renewable values are checked against capacity.
pub fn read_scenarios_csv(path: &Path, sys: &PowerSystem) -> Result<ScenarioSet, PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    {
        let headers = reader.headers().map_err(|e| io_err(path, e))?;
        let expect = ["scenario_id", "series_id", "period", "value_mw"];
        if headers.len() < 4 || headers.iter().take(4).zip(expect).any(|(a, b)| a != b) {
            return Err(csv_err(
                path,
                1,
                format!("header must be '{}'", expect.join(",")),
            ));
        }
    }

    // Canonical series order: system renewables then loads.
    let sources: Vec<SourceInfo> = sys
        .re
        .iter()
        .map(|r| SourceInfo {
            id: r.id.clone(),
            kind: SeriesKind::Re,
            capacity: Some(r.capacity),
        })
        .chain(sys.loads.iter().map(|l| SourceInfo {
            id: l.id.clone(),
            kind: SeriesKind::Ld,
            capacity: None,
        }))
        .collect();
    let series_pos: HashMap<&str, usize> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();

    let mut scenario_order: Vec<String> = Vec::new();
    let mut scenario_pos: HashMap<String, usize> = HashMap::new();
    // values[scenario][series] -> Vec<(period, value)>
    let mut values: Vec<Vec<Vec<(usize, f64)>>> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        if record.len() < 4 {
            return Err(csv_err(path, line, "expected 4 columns"));
        }
        let scen_id = record[0].trim().to_string();
        let series_id = record[1].trim();
        let period: usize = record[2]
            .trim()
            .parse()
            .map_err(|_| csv_err(path, line, format!("bad period '{}'", &record[2])))?;
        let value: f64 = record[3]
            .trim()
            .parse()
            .map_err(|_| csv_err(path, line, format!("bad value '{}'", &record[3])))?;
        let &si = series_pos.get(series_id).ok_or_else(|| {
            csv_err(
                path,
                line,
                format!("series '{series_id}' is not a renewable or load of the system"),
            )
        })?;
        let sp = *scenario_pos.entry(scen_id.clone()).or_insert_with(|| {
            scenario_order.push(scen_id.clone());
            values.push(vec![Vec::new(); sources.len()]);
            values.len() - 1
        });
        values[sp][si].push((period, value));
    }

    if values.is_empty() {
        return Err(csv_err(path, 1, "no data rows"));
    }

    // Assemble dense matrices and check completeness.
    let horizon = values[0].first().map(|v| v.len()).unwrap_or(0);
    let mut data = Vec::with_capacity(values.len());
    for (sp, scen) in values.into_iter().enumerate() {
        let mut matrix = Vec::with_capacity(sources.len());
        for (si, mut entries) in scen.into_iter().enumerate() {
            if entries.len() != horizon {
                return Err(csv_err(
                    path,
                    0,
                    format!(
                        "scenario '{}', series '{}': {} rows, expected {horizon}",
                        scenario_order[sp],
                        sources[si].id,
                        entries.len()
                    ),
                ));
            }
            entries.sort_unstable_by_key(|&(p, _)| p);
            let mut series = vec![f64::NAN; horizon];
            for (idx, (p, v)) in entries.into_iter().enumerate() {
                if p != idx {
                    return Err(csv_err(
                        path,
                        0,
                        format!(
                            "scenario '{}', series '{}': periods must be 0..{} without gaps",
                            scenario_order[sp],
                            sources[si].id,
                            horizon - 1
                        ),
                    ));
                }
                series[p] = v;
            }
            matrix.push(series);
        }
        data.push(matrix);
    }

    ScenarioSet::new(sources, data).map_err(PipelineError::from)
}

/// Writes a scenario set in the long format, scenarios ordered by index.
pub fn write_scenarios_csv(path: &Path, set: &ScenarioSet) -> Result<(), PipelineError> {
    let mut out = String::from("scenario_id,series_id,period,value_mw\n");
    for (s, scen) in set.data.iter().enumerate() {
        for (r, series) in scen.iter().enumerate() {
            let id = &set.sources[r].id;
            for (t, v) in series.iter().enumerate() {
                out.push_str(&format!("{s},{id},{t},{v}\n"));
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a per-period threshold file (`period,threshold`).
pub fn read_thresholds_csv(path: &Path, horizon: usize) -> Result<Vec<f64>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let mut values = vec![f64::NAN; horizon];
    let mut seen = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        let period: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| csv_err(path, line, "bad period"))?;
        let value: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| csv_err(path, line, "bad threshold"))?;
        if period >= horizon {
            return Err(csv_err(
                path,
                line,
                format!("period {period} beyond horizon {horizon}"),
            ));
        }
        values[period] = value;
        seen += 1;
    }
    if seen != horizon || values.iter().any(|v| v.is_nan()) {
        return Err(PipelineError::Config {
            path: path.to_path_buf(),
            message: format!("threshold file must cover periods 0..{}", horizon - 1),
        });
    }
    Ok(values)
}

/// Committed traces: `scenario_id,period,eme_cost,soc_*` first, then the
/// dispatch detail columns.
pub fn write_traces_csv(
    path: &Path,
    sys: &PowerSystem,
    traces: &[EvolutionTrace],
) -> Result<(), PipelineError> {
    let mut header = String::from("scenario_id,period,eme_cost");
    for e in &sys.ses {
        header.push_str(&format!(",soc_{}", e.id));
    }
    header.push_str(",eme_mw");
    for u in &sys.tpg {
        header.push_str(&format!(",tpg_{}_mw,tpg_{}_on", u.id, u.id));
    }
    for e in &sys.ses {
        header.push_str(&format!(",ses_{}_ch_mw,ses_{}_dc_mw", e.id, e.id));
    }
    for d in &sys.dr {
        header.push_str(&format!(",dr_{}_mw", d.id));
    }
    for r in &sys.re {
        header.push_str(&format!(",re_{}_mw,curt_{}_mw", r.id, r.id));
    }
    let mut out = header;
    out.push('\n');
    for trace in traces {
        for t in 0..trace.horizon {
            out.push_str(&format!("{},{t},{}", trace.scenario, trace.eme_cost[t]));
            for e in 0..sys.ses.len() {
                out.push_str(&format!(",{}", trace.soc[e][t]));
            }
            out.push_str(&format!(",{}", trace.eme_mw[t]));
            for g in 0..sys.tpg.len() {
                out.push_str(&format!(
                    ",{},{}",
                    trace.tpg_power[g][t], trace.tpg_on[g][t] as u8
                ));
            }
            for e in 0..sys.ses.len() {
                out.push_str(&format!(
                    ",{},{}",
                    trace.ses_charge[e][t], trace.ses_discharge[e][t]
                ));
            }
            for m in 0..sys.dr.len() {
                out.push_str(&format!(",{}", trace.dr_power[m][t]));
            }
            for r in 0..sys.re.len() {
                out.push_str(&format!(
                    ",{},{}",
                    trace.re_used[r][t], trace.re_curtailed[r][t]
                ));
            }
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_risk_csv(path: &Path, profile: &RiskProfile) -> Result<(), PipelineError> {
    let mut out = String::from("period,var,cvar,threshold,flag\n");
    for t in 0..profile.horizon() {
        out.push_str(&format!(
            "{t},{},{},{},{}\n",
            profile.var[t], profile.cvar[t], profile.thresholds[t], profile.flagged[t]
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_reference_csv(
    path: &Path,
    sys: &PowerSystem,
    reference: &SocReference,
) -> Result<(), PipelineError> {
    let mut out = String::from("period");
    for e in &sys.ses {
        out.push_str(&format!(",soc_{}", e.id));
    }
    out.push('\n');
    for t in 0..reference.horizon() {
        out.push_str(&t.to_string());
        for series in &reference.soc {
            out.push_str(&format!(",{}", series[t]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Averaged subgradients at the flagged periods only.
pub fn write_subgradients_csv(
    path: &Path,
    sys: &PowerSystem,
    profile: &RiskProfile,
    field: &SubgradientField,
) -> Result<(), PipelineError> {
    let mut out = String::from("period");
    for e in &sys.ses {
        out.push_str(&format!(",gbar_{}", e.id));
    }
    out.push('\n');
    for t in 0..profile.horizon() {
        if !profile.flagged[t] {
            continue;
        }
        out.push_str(&t.to_string());
        for series in &field.avg {
            out.push_str(&format!(",{}", series[t]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_mitigation_csv(path: &Path, report: &MitigationReport) -> Result<(), PipelineError> {
    let mut out = String::from("iteration,step_size,max_cvar,flagged,accepted\n");
    for s in &report.steps {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.iteration, s.step_size, s.max_cvar, s.flagged, s.accepted
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Writes via a temp file then renames, so partial outputs never appear.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(path, e))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
