//! CSV output with the schema line and config echo, and sample-file parsing.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result, SampleSet};

pub const SCHEMA_LINE: &str = "schema=1";

/// 17 significant digits; `inf`, `-inf`, `nan` for non-finite values.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Accumulates a CSV document: schema line, `#` config echo, header, rows,
/// and trailing `#` summary lines.
pub struct CsvDoc {
    text: String,
}

impl CsvDoc {
    pub fn new<C: Serialize>(command: &str, config: &C, columns: &[&str]) -> Result<Self> {
        let mut text = String::new();
        text.push_str(SCHEMA_LINE);
        text.push('\n');
        let _ = writeln!(text, "# command: {command}");
        let json = serde_json::to_string_pretty(config)
            .map_err(|e| Error::input(format!("cannot serialize config: {e}")))?;
        for line in json.lines() {
            let _ = writeln!(text, "# {line}");
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Ok(Self { text })
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// JSON report wrapper shared by the report-style commands.
#[derive(Serialize)]
pub struct JsonReport<'a, C: Serialize, R: Serialize> {
    pub schema: u32,
    pub command: &'a str,
    pub config: &'a C,
    pub report: &'a R,
}

pub fn json_report<C: Serialize, R: Serialize>(command: &str, config: &C, report: &R) -> Result<String> {
    let doc = JsonReport {
        schema: 1,
        command,
        config,
        report,
    };
    let mut s = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::input(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Parses one sample per row, one coordinate per column. A first row that
/// does not parse as numbers is taken as a header.
pub fn parse_samples(text: &str, source: &str) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut dim = None;
    let mut rows = 0usize;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(format!("{source}: {e}")))?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if idx == 0 && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        let d = *dim.get_or_insert(rec.len());
        if rec.len() != d {
            return Err(Error::input(format!(
                "{source}: row {line} has {} columns, expected {d}",
                rec.len()
            )));
        }
        for (col, (cell, p)) in rec.iter().zip(parsed).enumerate() {
            match p {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::input(format!(
                        "{source}: row {line}, column {}: cannot parse {cell:?} as a finite number",
                        col + 1
                    )))
                }
            }
        }
        rows += 1;
    }
    let dim = dim.ok_or_else(|| Error::input(format!("{source}: no data rows")))?;
    SampleSet::from_flat(data, rows, dim)
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path)?;
    parse_samples(&text, &path.display().to_string())
}
