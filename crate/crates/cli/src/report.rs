//! Deterministic output: every number is written with 17 significant digits
//! and nothing time-dependent goes into a file.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use qrel_core::checks::Check;
use qrel_core::suite::CriterionOutcome;
use qrel_core::TrajectoryRecord;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// `{:.16e}`, the format of every float in reports and tables.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Float serialised in `sci` form; non-finite values become `null`.
#[derive(Clone, Copy, Debug)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(sci(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub expected: Num,
    pub measured: Num,
    pub tolerance: Num,
    pub relation: &'static str,
    pub pass: bool,
    pub kind: &'static str,
    pub source: &'static str,
}

impl From<&Check> for CheckRecord {
    fn from(c: &Check) -> Self {
        Self {
            name: c.name.clone(),
            expected: Num(c.expected),
            measured: Num(c.measured),
            tolerance: Num(c.tolerance),
            relation: c.relation.name(),
            pass: c.pass,
            kind: c.kind.name(),
            source: c.source,
        }
    }
}

#[derive(Serialize)]
pub struct CriterionRecord {
    pub id: usize,
    pub title: &'static str,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
}

impl From<&CriterionOutcome> for CriterionRecord {
    fn from(o: &CriterionOutcome) -> Self {
        // runtimes are wall-clock and stay out of the file
        Self {
            id: o.id,
            title: o.title,
            pass: qrel_core::checks::all_pass(&o.checks),
            checks: o.checks.iter().map(CheckRecord::from).collect(),
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serialising report")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub const TRAJECTORY_HEADER: [&str; 9] =
    ["step", "time", "h_q", "k_q", "s_gen", "delta_x2", "delta_p2_q", "norm", "continuity_residual"];

pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(TRAJECTORY_HEADER)?;
    for r in records {
        let row = [
            r.step.to_string(),
            sci(r.time),
            sci(r.h_q),
            sci(r.k_q),
            sci(r.s_gen),
            sci(r.delta_x2),
            sci(r.delta_p2_q),
            sci(r.norm),
            sci(r.continuity_residual),
        ];
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a table of floats under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| sci(v)))?;
    }
    w.flush()?;
    Ok(())
}
