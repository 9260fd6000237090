//! CSV ingestion: header-based column selection, strict typing of the
//! response (nonnegative integers only), and row/column-addressed error
//! messages. Line numbers refer to the file as a text editor shows it
//! (header = line 1).

use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};
use dwcount::Dataset;

use crate::CliError;

/// Largest integer exactly representable in an f64; counts above it cannot be
/// round-tripped through the float parse used for integrality checking.
const MAX_EXACT_COUNT: f64 = 9_007_199_254_740_992.0;

pub fn load_dataset(
    path: &Path,
    response: &str,
    covariates: &[String],
    add_intercept: bool,
) -> Result<Dataset, CliError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("cannot read the header row of {}: {e}", path.display())))?
        .clone();

    let response_idx = locate_column(&headers, response, path)?;
    let mut covariate_idx = Vec::with_capacity(covariates.len());
    for name in covariates {
        if name == response {
            return Err(CliError::usage(format!(
                "column `{name}` cannot be both the response and a covariate"
            )));
        }
        covariate_idx.push(locate_column(&headers, name, path)?);
    }

    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| CliError::data(format!("malformed CSV record in {}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        y.push(parse_response(&record, response_idx, response, line)?);
        let mut row = Vec::with_capacity(covariate_idx.len());
        for (&idx, name) in covariate_idx.iter().zip(covariates) {
            row.push(parse_covariate(&record, idx, name, line)?);
        }
        rows.push(row);
    }
    if y.is_empty() {
        return Err(CliError::data(format!(
            "{} has a header but no data rows",
            path.display()
        )));
    }

    Dataset::from_rows(y, &rows, covariates.to_vec(), add_intercept).map_err(CliError::from)
}

/// Load only covariate columns (no response), for scoring new data against a
/// saved fit. Row order is preserved; values must be finite numbers.
pub fn load_covariate_rows(path: &Path, covariates: &[String]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("cannot read the header row of {}: {e}", path.display())))?
        .clone();
    let mut covariate_idx = Vec::with_capacity(covariates.len());
    for name in covariates {
        covariate_idx.push(locate_column(&headers, name, path)?);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| CliError::data(format!("malformed CSV record in {}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        let mut row = Vec::with_capacity(covariate_idx.len());
        for (&idx, name) in covariate_idx.iter().zip(covariates) {
            row.push(parse_covariate(&record, idx, name, line)?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!(
            "{} has a header but no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn locate_column(headers: &StringRecord, name: &str, path: &Path) -> Result<usize, CliError> {
    let matches: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == name)
        .map(|(i, _)| i)
        .collect();
    match matches.len() {
        0 => Err(CliError::data(format!(
            "column `{name}` not found in {}; available columns: {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(", ")
        ))),
        1 => Ok(matches[0]),
        _ => Err(CliError::data(format!(
            "column `{name}` appears {} times in {}; headers must be unique to select by name",
            matches.len(),
            path.display()
        ))),
    }
}

fn field<'r>(
    record: &'r StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<&'r str, CliError> {
    let raw = record.get(idx).ok_or_else(|| {
        CliError::data(format!("line {line}: row is too short for column `{name}`"))
    })?;
    if raw.is_empty() {
        return Err(CliError::data(format!(
            "line {line}: missing value in column `{name}`"
        )));
    }
    Ok(raw)
}

fn parse_response(
    record: &StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<u64, CliError> {
    let raw = field(record, idx, name, line)?;
    let value: f64 = raw.parse().map_err(|_| {
        CliError::data(format!(
            "line {line}: response `{name}` value `{raw}` is not a number"
        ))
    })?;
    if !value.is_finite() || value < 0.0 || value.fract() != 0.0 || value > MAX_EXACT_COUNT {
        return Err(CliError::data(format!(
            "line {line}: response `{name}` value `{raw}` is not a nonnegative integer count"
        )));
    }
    Ok(value as u64)
}

fn parse_covariate(
    record: &StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<f64, CliError> {
    let raw = field(record, idx, name, line)?;
    let value: f64 = raw.parse().map_err(|_| {
        CliError::data(format!(
            "line {line}: covariate `{name}` value `{raw}` is not a number"
        ))
    })?;
    if !value.is_finite() {
        return Err(CliError::data(format!(
            "line {line}: covariate `{name}` value `{raw}` is not finite"
        )));
    }
    Ok(value)
}
