//! Report files. CSV carries one line per row; JSON mirrors the whole report.
//! Floats are written with 17 significant digits in both, so reading a file
//! back reproduces every value bit for bit.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{InequalityName, InequalityReport};
use crate::io::{self, fmt_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 9] = [
    "name", "t", "s", "lhs", "rhs", "deficit", "dim_term", "ent_f", "ent_g",
];

/// One CSV line. Absent optional values are empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub name: InequalityName,
    pub t: f64,
    pub s: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub dim_term: Option<f64>,
    pub ent_f: Option<f64>,
    pub ent_g: Option<f64>,
}

impl CsvRow {
    pub fn of(report: &InequalityReport) -> Vec<CsvRow> {
        report
            .rows
            .iter()
            .map(|r| CsvRow {
                name: report.name,
                t: r.t,
                s: r.s,
                lhs: r.lhs,
                rhs: r.rhs,
                deficit: r.deficit,
                dim_term: r.dim_term,
                ent_f: r.ent_f,
                ent_g: r.ent_g,
            })
            .collect()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// The report as file contents.
pub fn render_report(report: &InequalityReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => io::to_json(report),
        ReportFormat::Csv => {
            let mut lines = vec![CSV_COLUMNS.iter().map(|c| c.to_string()).collect::<Vec<_>>()];
            for r in CsvRow::of(report) {
                lines.push(vec![
                    r.name.as_str().to_string(),
                    fmt_f64(r.t),
                    opt(r.s),
                    fmt_f64(r.lhs),
                    fmt_f64(r.rhs),
                    fmt_f64(r.deficit),
                    opt(r.dim_term),
                    opt(r.ent_f),
                    opt(r.ent_g),
                ]);
            }
            io::csv_string(lines)
        }
    }
}

pub fn emit_report(report: &InequalityReport, format: ReportFormat, path: &Path) -> Result<()> {
    io::write_text(path, &render_report(report, format))
}

pub fn read_report_json(path: &Path) -> Result<InequalityReport> {
    io::read_json(path)
}

pub fn read_report_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let (header, rows) = io::read_csv_table(path)?;
    if header != CSV_COLUMNS {
        return Err(Error::parse(
            path,
            format!("expected columns {CSV_COLUMNS:?}, found {header:?}"),
        ));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            let num = |c: usize| io::parse_f64(&row[c], path, line);
            let opt_num = |c: usize| -> Result<Option<f64>> {
                if row[c].is_empty() {
                    Ok(None)
                } else {
                    num(c).map(Some)
                }
            };
            let name = row[0]
                .parse::<InequalityName>()
                .map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
            Ok(CsvRow {
                name,
                t: num(1)?,
                s: opt_num(2)?,
                lhs: num(3)?,
                rhs: num(4)?,
                deficit: num(5)?,
                dim_term: opt_num(6)?,
                ent_f: opt_num(7)?,
                ent_g: opt_num(8)?,
            })
        })
        .collect()
}
