//! Result CSVs with a `#` metadata header (version, command, seed and
//! configuration hash). `NA` marks metrics of a method that never
//! converged.

use std::fs;
use std::path::Path;

use crate::error::{CliError, DataError};

pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

pub trait ResultRow: Sized {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> Result<Self, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRow {
    pub scenario: String,
    pub method: String,
    pub missing_pct: f64,
    pub relative_bias: Option<f64>,
    pub ail: Option<f64>,
    pub coverage: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub missing_pct: f64,
    pub method: String,
    pub ail: Option<f64>,
    pub gof_p: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("'{s}' is not a number"))
}

fn parse_opt(s: &str) -> Result<Option<f64>, String> {
    if s == NA {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

impl ResultRow for SimulationRow {
    const HEADER: &'static [&'static str] =
        &["scenario", "method", "missing_pct", "relative_bias", "ail", "coverage", "failures"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            self.method.clone(),
            self.missing_pct.to_string(),
            opt(self.relative_bias),
            opt(self.ail),
            opt(self.coverage),
            self.failures.to_string(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self, String> {
        Ok(SimulationRow {
            scenario: f[0].to_string(),
            method: f[1].to_string(),
            missing_pct: parse_f64(f[2])?,
            relative_bias: parse_opt(f[3])?,
            ail: parse_opt(f[4])?,
            coverage: parse_opt(f[5])?,
            failures: f[6].parse().map_err(|_| format!("'{}' is not a count", f[6]))?,
        })
    }
}

impl ResultRow for AnalysisRow {
    const HEADER: &'static [&'static str] = &["missing_pct", "method", "ail", "gof_p"];

    fn fields(&self) -> Vec<String> {
        vec![self.missing_pct.to_string(), self.method.clone(), opt(self.ail), opt(self.gof_p)]
    }

    fn from_fields(f: &[&str]) -> Result<Self, String> {
        Ok(AnalysisRow {
            missing_pct: parse_f64(f[0])?,
            method: f[1].to_string(),
            ail: parse_opt(f[2])?,
            gof_p: parse_opt(f[3])?,
        })
    }
}

/// Renders the metadata block, the header and every row.
pub fn render_results<R: ResultRow>(rows: &[R], meta: &Metadata) -> Result<String, CliError> {
    let mut out = format!(
        "# countimpute {}\n# command = {}\n# seed = {}\n# config_hash = {}\n",
        env!("CARGO_PKG_VERSION"),
        meta.command,
        meta.seed,
        meta.config_hash
    );
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(R::HEADER).map_err(DataError::from)?;
    for row in rows {
        writer.write_record(row.fields()).map_err(DataError::from)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::io("<buffer>", e.into_error()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

pub fn emit_results<R: ResultRow>(rows: &[R], path: &Path, meta: &Metadata) -> Result<(), CliError> {
    let text = render_results(rows, meta)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `key = value` pairs from the comment header of a results file.
pub type MetadataPairs = Vec<(String, String)>;

/// Parses a results file written by [`emit_results`], returning the rows
/// and the metadata pairs.
pub fn parse_results<R: ResultRow>(text: &str) -> Result<(Vec<R>, MetadataPairs), DataError> {
    let meta = text
        .lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(DataError::Schema { path: "results".into(), message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        rows.push(R::from_fields(&fields).map_err(|message| DataError::Row { path: "results".into(), line, message })?);
    }
    Ok((rows, meta))
}

pub fn read_results<R: ResultRow>(path: &Path) -> Result<Vec<R>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_results(&text)?.0)
}
