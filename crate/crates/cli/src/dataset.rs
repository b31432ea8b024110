//! `y,x` CSV ingestion. Lines starting with `#` are comments and the
//! literal `NA` marks a missing covariate.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use countimpute_core::missingness::{Dataset, ResponseKind};

use crate::error::{CliError, DataError};

pub const MISSING_MARKER: &str = "NA";

pub fn load_dataset(path: &Path, kind: ResponseKind) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_dataset(file, &path.display().to_string(), kind)?)
}

pub fn parse_dataset<R: Read>(input: R, name: &str, kind: ResponseKind) -> Result<Dataset, DataError> {
    let schema = |message: &str| DataError::Schema { path: name.to_string(), message: message.to_string() };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(schema("empty file; expected header 'y,x'")),
    };
    if header.len() != 2 || &header[0] != "y" || &header[1] != "x" {
        return Err(schema("header must be exactly 'y,x'"));
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row_error = |message: String| DataError::Row { path: name.to_string(), line, message };
        if record.len() != 2 {
            return Err(row_error(format!("expected 2 fields, found {}", record.len())));
        }
        let yv: f64 = record[0].parse().map_err(|_| row_error(format!("response '{}' is not a number", &record[0])))?;
        if !yv.is_finite() {
            return Err(row_error(format!("response '{}' is not finite", &record[0])));
        }
        if kind == ResponseKind::Binary && yv != 0.0 && yv != 1.0 {
            return Err(row_error(format!("binary response must be 0 or 1, got {yv}")));
        }
        if kind == ResponseKind::Discrete && (yv < 0.0 || yv.trunc() != yv) {
            return Err(row_error(format!("discrete response must be a non-negative integer, got {yv}")));
        }
        y.push(yv);
        let cell = &record[1];
        if cell == MISSING_MARKER {
            x.push(None);
            continue;
        }
        let value: i64 = cell.parse().map_err(|_| row_error(format!("covariate '{cell}' is not an integer count")))?;
        if value < 0 {
            return Err(DataError::NegativeCount { path: name.to_string(), line, value });
        }
        x.push(Some(value as u64));
    }
    if y.is_empty() {
        return Err(schema("no data rows"));
    }
    Dataset::with_missing(kind, y, x).map_err(DataError::Core)
}

/// The covariate column with missing cells written as `NA`.
pub fn format_dataset(data: &Dataset) -> String {
    let mut out = String::from("y,x\n");
    for i in 0..data.len() {
        match data.observed_x(i) {
            Some(v) => out.push_str(&format!("{},{v}\n", data.y()[i])),
            None => out.push_str(&format!("{},{MISSING_MARKER}\n", data.y()[i])),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset, DataError> {
        parse_dataset(text.as_bytes(), "test.csv", ResponseKind::Continuous)
    }

    #[test]
    fn reads_missing_marker_and_comments() {
        let data = parse("# source\ny,x\n1.5,2\n# mid\n2.0,NA\n3,0\n").unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.missing_count(), 1);
        assert_eq!(data.observed_x(0), Some(2));
        assert_eq!(data.observed_x(1), None);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse(""), Err(DataError::Schema { .. })));
        assert!(matches!(parse("a,b\n1,2\n"), Err(DataError::Schema { .. })));
        assert!(matches!(parse("y,x\n"), Err(DataError::Schema { .. })));
        match parse("y,x\n1,2\n1,2.5\n") {
            Err(DataError::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("y,x\n1,-1\n"), Err(DataError::NegativeCount { value: -1, .. })));
    }

    #[test]
    fn format_round_trips() {
        let data = parse("y,x\n1.25,2\n-3,NA\n").unwrap();
        let again = parse(&format_dataset(&data)).unwrap();
        assert_eq!(again.y(), data.y());
        assert_eq!(again.mask(), data.mask());
    }
}
