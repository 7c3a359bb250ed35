//! Criterion results, tables and their byte-stable CSV/JSON rendering.
//!
//! Every float is written with 17 significant digits in exponent form, so
//! identical results give identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::fit::PowerFit;

use super::config::{ExperimentName, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub experiment: &'static str,
    pub value: f64,
    pub bound: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn at_most(id: u8, name: &'static str, experiment: ExperimentName, value: f64, bound: f64) -> Self {
        Self::new(id, name, experiment, value, bound, Comparison::AtMost)
    }

    pub fn at_least(id: u8, name: &'static str, experiment: ExperimentName, value: f64, bound: f64) -> Self {
        Self::new(id, name, experiment, value, bound, Comparison::AtLeast)
    }

    fn new(id: u8, name: &'static str, experiment: ExperimentName, value: f64, bound: f64, cmp: Comparison) -> Self {
        // NaN fails either way.
        let pass = match cmp {
            Comparison::AtMost => value <= bound,
            Comparison::AtLeast => value >= bound,
        };
        Self { id, name, experiment: experiment.as_str(), value, bound, comparison: cmp, pass, detail: String::new() }
    }

    /// Adds an extra condition that must also hold.
    pub fn and(mut self, ok: bool, why: &str) -> Self {
        if !ok {
            self.pass = false;
            self.push_detail(&format!("failed: {why}"));
        }
        self
    }

    pub fn with_detail(mut self, detail: impl AsRef<str>) -> Self {
        self.push_detail(detail.as_ref());
        self
    }

    fn push_detail(&mut self, s: &str) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(s);
    }

    /// One line: `[PASS] C07 name: value <= bound (detail)`.
    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        let mut s = format!(
            "[{}] C{:02} {}: {} {op} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            num(self.value),
            num(self.bound)
        );
        if !self.detail.is_empty() {
            s.push_str(&format!(" ({})", self.detail));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// A CSV-ready table.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header of {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: PowerFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: &'static str,
    pub criteria: Vec<CriterionResult>,
    pub fits: Vec<NamedFit>,
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new(experiment: ExperimentName) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.as_str(),
            criteria: Vec::new(),
            fits: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn fit(&mut self, name: impl Into<String>, fit: &PowerFit) {
        self.fits.push(NamedFit { name: name.into(), fit: fit.clone() });
    }

    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// Summary of a multi-experiment run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub quick: bool,
    pub experiments: Vec<&'static str>,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
}

/// `{:.16e}`: 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Pretty JSON with every float at 17 significant digits.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("json output is utf-8"))
}

/// Writes `<experiment>.json` and one `<experiment>.<table>.csv` per table;
/// returns the written paths in order.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let json = dir.join(format!("{}.json", report.experiment));
    std::fs::write(&json, to_json(report)?)?;
    paths.push(json);
    for t in &report.tables {
        let p = dir.join(format!("{}.{}.csv", report.experiment, t.name));
        std::fs::write(&p, t.to_csv()?)?;
        paths.push(p);
    }
    Ok(paths)
}

pub fn emit_summary(summary: &RunSummary, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join("summary.json");
    std::fs::write(&p, to_json(summary)?)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        let s = to_json(&vec![0.1f64, 1e-300]).unwrap();
        assert!(s.contains("1.0000000000000001e-1") && s.contains("1.0000000000000000e-300"), "{s}");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1e-300]);
    }

    #[test]
    fn csv_header_and_rows() {
        let mut t = Table::new("demo", &["h", "n", "label"]);
        t.push(vec![0.5.into(), 3usize.into(), "a,b".into()]);
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "h,n,label\n5.0000000000000000e-1,3,\"a,b\"\n");
    }

    #[test]
    fn criterion_comparisons() {
        let c = CriterionResult::at_most(1, "x", ExperimentName::JostValidate, 1e-9, 1e-8);
        assert!(c.pass);
        assert!(!CriterionResult::at_least(1, "x", ExperimentName::JostValidate, f64::NAN, 0.0).pass);
        let c = c.and(false, "extra");
        assert!(!c.pass && c.line().starts_with("[FAIL] C01 x"));
    }
}
