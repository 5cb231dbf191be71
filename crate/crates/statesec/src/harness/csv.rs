//! CSV persistence for trial records and bound trajectories.
//!
//! Trial records get one row per (trial, step):
//!
//! ```text
//! trial,k,gamma_u,gamma_e,k0_flag,
//!   user_mmse_0..n, eav_mmse_0..n, open_loop_mmse_0..n, bound_mmse_0..n,
//!   log1p_user_mmse_0..n, log1p_eav_mmse_0..n,
//!   log1p_open_loop_mmse_0..n, log1p_bound_mmse_0..n
//! ```
//!
//! The mmse columns are the per-state error-covariance diagonals; bound
//! columns are empty before the trial's first critical step. The log1p
//! columns are plotting helpers — covariances of unstable states span many
//! decades, so plots use ln(1 + x). Numbers carry 12 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::BoundTrajectory;
use crate::harness::trial::TrialRecord;
use crate::sysmodel::{open_loop_cov_step, PartitionedSystem};

/// The header row for an n-state system.
pub fn csv_header(n: usize) -> String {
    let mut cols: Vec<String> = ["trial", "k", "gamma_u", "gamma_e", "k0_flag"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for group in ["user_mmse", "eav_mmse", "open_loop_mmse", "bound_mmse"] {
        for i in 0..n {
            cols.push(format!("{group}_{i}"));
        }
    }
    for group in ["user_mmse", "eav_mmse", "open_loop_mmse", "bound_mmse"] {
        for i in 0..n {
            cols.push(format!("log1p_{group}_{i}"));
        }
    }
    cols.join(",")
}

fn push_number(row: &mut String, v: f64) {
    row.push(',');
    row.push_str(&format!("{v:.11e}"));
}

fn push_optional(row: &mut String, v: Option<f64>) {
    match v {
        Some(v) => push_number(row, v),
        None => row.push(','),
    }
}

/// Render records to CSV text. Returns (text, data row count).
pub fn render_csv(records: &[TrialRecord]) -> Result<(String, usize)> {
    let n = records
        .first()
        .and_then(|r| r.steps.first())
        .map(|s| s.user_cov_diag.len())
        .ok_or_else(|| Error::InvalidArgument("no steps to serialize".into()))?;
    let mut text = csv_header(n);
    text.push('\n');
    let mut rows = 0usize;
    for record in records {
        for step in &record.steps {
            let mut row = format!(
                "{},{},{},{},{}",
                record.trial,
                step.k,
                step.gamma_u as u8,
                step.gamma_e as u8,
                (record.first_critical == Some(step.k)) as u8
            );
            for group in [&step.user_cov_diag, &step.eav_cov_diag, &step.open_cov_diag] {
                for v in group.iter() {
                    push_number(&mut row, *v);
                }
            }
            for i in 0..n {
                push_optional(&mut row, step.bound_cov_diag.as_ref().map(|b| b[i]));
            }
            for group in [&step.user_cov_diag, &step.eav_cov_diag, &step.open_cov_diag] {
                for v in group.iter() {
                    push_number(&mut row, v.ln_1p());
                }
            }
            for i in 0..n {
                push_optional(&mut row, step.bound_cov_diag.as_ref().map(|b| b[i].ln_1p()));
            }
            text.push_str(&row);
            text.push('\n');
            rows += 1;
        }
    }
    Ok((text, rows))
}

/// Write records to a CSV file. Returns the number of data rows written.
pub fn emit_csv(records: &[TrialRecord], path: &Path) -> Result<usize> {
    let (text, rows) = render_csv(records)?;
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(text.as_bytes())?;
    writer.flush()?;
    Ok(rows)
}

/// Side-by-side CSV for weighting comparisons: the same schema with a
/// leading `variant` column.
pub fn emit_compare_csv(batches: &[(&str, &[TrialRecord])], path: &Path) -> Result<usize> {
    let mut text = String::new();
    let mut rows = 0usize;
    let mut wrote_header = false;
    for (label, records) in batches {
        let (body, count) = render_csv(records)?;
        let mut lines = body.lines();
        let header = lines.next().expect("render_csv always emits a header");
        if !wrote_header {
            text.push_str("variant,");
            text.push_str(header);
            text.push('\n');
            wrote_header = true;
        }
        for line in lines {
            text.push_str(label);
            text.push(',');
            text.push_str(line);
            text.push('\n');
        }
        rows += count;
    }
    if !wrote_header {
        return Err(Error::InvalidArgument("no batches to serialize".into()));
    }
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(text.as_bytes())?;
    writer.flush()?;
    Ok(rows)
}

/// Render an anchored bound trajectory to CSV text: one row per step from
/// the anchor to the horizon with the bound covariance diagonal, its dual
/// information diagonal, and the open-loop covariance diagonal for
/// reference. Returns (text, data row count).
pub fn render_bound_csv(
    traj: &BoundTrajectory,
    sys: &PartitionedSystem,
) -> Result<(String, usize)> {
    let n = sys.n();
    let mut cols = vec!["k".to_string()];
    for group in ["bound_mmse", "bound_info", "open_loop_mmse"] {
        for i in 0..n {
            cols.push(format!("{group}_{i}"));
        }
    }
    let mut text = cols.join(",");
    text.push('\n');
    // Open-loop covariance carried from the start of the trial: Σ₀ at
    // k = 0, stepped once per subsequent step.
    let mut open = sys.sigma0().clone();
    for _ in 0..traj.k0 {
        open = open_loop_cov_step(&open, sys)?;
    }
    let mut rows = 0usize;
    for (j, (pbar, ybar)) in traj.pbar.iter().zip(&traj.ybar).enumerate() {
        let mut row = format!("{}", traj.k0 + j);
        for m in [pbar, ybar, &open] {
            for i in 0..n {
                push_number(&mut row, m[(i, i)]);
            }
        }
        text.push_str(&row);
        text.push('\n');
        rows += 1;
        open = open_loop_cov_step(&open, sys)?;
    }
    Ok((text, rows))
}

/// Write a bound trajectory to a CSV file. Returns the data row count.
pub fn emit_bound_csv(
    traj: &BoundTrajectory,
    sys: &PartitionedSystem,
    path: &Path,
) -> Result<usize> {
    let (text, rows) = render_bound_csv(traj, sys)?;
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(text.as_bytes())?;
    writer.flush()?;
    Ok(rows)
}

/// One parsed CSV data row (core columns; the log1p helpers are derived).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub trial: usize,
    pub k: usize,
    pub gamma_u: bool,
    pub gamma_e: bool,
    pub k0_flag: bool,
    pub user_mmse: Vec<f64>,
    pub eav_mmse: Vec<f64>,
    pub open_loop_mmse: Vec<f64>,
    pub bound_mmse: Option<Vec<f64>>,
}

/// Parse CSV text produced by [`render_csv`] / [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?;
    let n = header
        .split(',')
        .filter(|c| c.starts_with("user_mmse_"))
        .count();
    if n == 0 || header != csv_header(n) {
        return Err(Error::InvalidArgument(
            "CSV header does not match the documented schema".into(),
        ));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 + 8 * n {
            return Err(Error::InvalidArgument(format!(
                "row {} has {} fields, expected {}",
                idx + 1,
                fields.len(),
                5 + 8 * n
            )));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::InvalidArgument(format!("row {}: {e}", idx + 1)))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("row {}: {e}", idx + 1)))
        };
        let group = |start: usize| -> Result<Vec<f64>> {
            fields[start..start + n]
                .iter()
                .map(|s| parse_f64(s))
                .collect()
        };
        let bound = if fields[5 + 3 * n].is_empty() {
            None
        } else {
            Some(group(5 + 3 * n)?)
        };
        rows.push(CsvRow {
            trial: parse_usize(fields[0])?,
            k: parse_usize(fields[1])?,
            gamma_u: fields[2] == "1",
            gamma_e: fields[3] == "1",
            k0_flag: fields[4] == "1",
            user_mmse: group(5)?,
            eav_mmse: group(5 + n)?,
            open_loop_mmse: group(5 + 2 * n)?,
            bound_mmse: bound,
        });
    }
    Ok(rows)
}
