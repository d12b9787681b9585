//! CSV and JSON artifacts. Column order is stable; floats use the shortest
//! round-trip representation, so equal results give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cdo::{CdoSweepResult, TrancheKind};
use crate::error::{Error, Result};
use crate::orchestrator::{MonotonicityReport, SweepResult};

pub const CCP_SWEEP_CSV: &str = "ccp_sweep.csv";
pub const CCP_MONOTONICITY_JSON: &str = "ccp_monotonicity.json";
pub const CCP_SETUP_JSON: &str = "ccp_setup.json";
pub const CDO_SWEEP_CSV: &str = "cdo_sweep.csv";
pub const CDO_REPORT_JSON: &str = "cdo_report.json";

pub const CCP_COLUMNS: [&str; 14] = [
    "rho_cr",
    "rho_wwr",
    "member",
    "cecl",
    "cecl_se",
    "ec",
    "ec_se",
    "var",
    "valid",
    "var_se",
    "ec_minus_cecl",
    "ec_minus_cecl_se",
    "invalid_reason",
    "config_hash",
];

pub const CDO_COLUMNS: [&str; 10] =
    ["tranche", "kind", "A", "B", "rho", "default_leg", "payment_leg", "default_se", "payment_se", "config_hash"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Io { path: "<csv buffer>".into(), message: e.to_string() };
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Io { path: "<csv buffer>".into(), message: e.to_string() })
}

pub fn ccp_sweep_csv(sweep: &SweepResult) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for cell in &sweep.cells {
        for (slot, &member) in sweep.reference_members.iter().enumerate() {
            let mut row = vec![cell.rho_cr.to_string(), cell.rho_wwr.to_string(), member.to_string()];
            match (cell.reports.get(slot), &cell.verdict) {
                (Some(r), _) => {
                    row.extend([r.cecl, r.cecl_se, r.ec, r.ec_se, r.var].map(|v| v.to_string()));
                    row.push("true".into());
                    row.extend([r.var_se, r.ec_minus_cecl, r.ec_minus_cecl_se].map(|v| v.to_string()));
                    row.push(String::new());
                }
                (None, verdict) => {
                    row.extend(std::iter::repeat_n(String::new(), 5));
                    row.push("false".into());
                    row.extend(std::iter::repeat_n(String::new(), 3));
                    row.push(match verdict {
                        crate::elliptical::ValidityVerdict::Invalid(reason) => reason.clone(),
                        crate::elliptical::ValidityVerdict::Valid => String::new(),
                    });
                }
            }
            row.push(sweep.config_hash.clone());
            rows.push(row);
        }
    }
    csv_bytes(&CCP_COLUMNS, rows)
}

#[derive(Serialize)]
struct SetupDoc<'a> {
    config_hash: &'a str,
    seed: u64,
    n_paths: usize,
    n_batches: usize,
    draws_hash: &'a str,
    total_im: f64,
    total_df: f64,
    df_over_im: f64,
    setup: &'a crate::ccp::ClearingSetup,
}

/// Writes the sweep CSV, the monotonicity JSON and the margin setup JSON
/// into `dir`. Returns the written paths.
pub fn write_ccp_outputs(dir: &Path, sweep: &SweepResult, report: &MonotonicityReport) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let csv_path = dir.join(CCP_SWEEP_CSV);
    fs::write(&csv_path, ccp_sweep_csv(sweep)?).map_err(|e| io_err(&csv_path, e))?;
    let mono_path = dir.join(CCP_MONOTONICITY_JSON);
    write_json(&mono_path, report)?;
    let setup_path = dir.join(CCP_SETUP_JSON);
    let (im, df) = (sweep.setup.total_im(), sweep.setup.total_df());
    write_json(
        &setup_path,
        &SetupDoc {
            config_hash: &sweep.config_hash,
            seed: sweep.seed,
            n_paths: sweep.n_paths,
            n_batches: sweep.n_batches,
            draws_hash: &sweep.draws_hash,
            total_im: im,
            total_df: df,
            df_over_im: df / im,
            setup: &sweep.setup,
        },
    )?;
    Ok(vec![csv_path, mono_path, setup_path])
}

fn kind_name(kind: TrancheKind) -> &'static str {
    match kind {
        TrancheKind::Equity => "equity",
        TrancheKind::Senior => "senior",
        TrancheKind::Mezzanine => "mezzanine",
    }
}

pub fn cdo_sweep_csv(result: &CdoSweepResult, config_hash: &str) -> Result<Vec<u8>> {
    let rows = result
        .cells
        .iter()
        .map(|c| {
            let t = &result.tranches[c.tranche];
            let p = &c.prices;
            vec![
                c.tranche.to_string(),
                kind_name(t.kind).to_string(),
                t.attachment.to_string(),
                t.detachment.to_string(),
                c.rho.to_string(),
                p.default_leg.to_string(),
                p.payment_leg.to_string(),
                p.default_se.to_string(),
                p.payment_se.to_string(),
                config_hash.to_string(),
            ]
        })
        .collect();
    csv_bytes(&CDO_COLUMNS, rows)
}

#[derive(Serialize)]
struct CdoDoc<'a> {
    config_hash: &'a str,
    l_max: f64,
    expected_loss: &'a [crate::cdo::ExpectedLossCheck],
    report: &'a crate::cdo::CdoMonotonicityReport,
}

pub fn write_cdo_outputs(dir: &Path, result: &CdoSweepResult, config_hash: &str) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let csv_path = dir.join(CDO_SWEEP_CSV);
    fs::write(&csv_path, cdo_sweep_csv(result, config_hash)?).map_err(|e| io_err(&csv_path, e))?;
    let json_path = dir.join(CDO_REPORT_JSON);
    write_json(
        &json_path,
        &CdoDoc { config_hash, l_max: result.l_max, expected_loss: &result.expected_loss, report: &result.report },
    )?;
    Ok(vec![csv_path, json_path])
}

/// Pretty JSON with a trailing newline, for stdout reports.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
