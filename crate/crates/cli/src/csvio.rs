//! CSV I/O: UTF-8, mandatory header row, '.' decimal, scientific notation
//! with 17 significant digits so every value round-trips bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use omcal::calibration::SpectrumTrace;

use crate::CliError;

/// One float, 17 significant digits, scientific.
pub fn fmt(value: f64) -> String {
    format!("{value:.16e}")
}

/// Render rows of optional cells (empty cell for `None`) under a header.
pub fn render(header: &[&str], rows: &[Vec<Option<f64>>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for cell in row {
            if !first {
                out.push(',');
            }
            first = false;
            if let Some(v) = cell {
                let _ = write!(out, "{}", fmt(*v));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Metadata (key = value pairs from '#' comment lines) plus data rows.
pub type Table = (Vec<(String, String)>, Vec<Vec<f64>>);

/// Parse a CSV with the exact expected header; returns the data rows.
/// Lines starting with '#' before the header are returned as metadata
/// (key = value pairs).
pub fn read_table(
    path: &Path,
    expected_header: &[&str],
    optional_columns: usize,
) -> Result<Table, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut metadata = Vec::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    let required = expected_header.len() - optional_columns;

    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                metadata.push((key.trim().to_string(), value.trim().to_string()));
            }
            continue;
        }
        if !header_seen {
            let got: Vec<&str> = line.split(',').map(str::trim).collect();
            if got.len() < required
                || got.len() > expected_header.len()
                || got.iter().zip(expected_header).any(|(g, e)| g != e)
            {
                return Err(CliError::Data(format!(
                    "line {}: header '{line}' does not match expected '{}'",
                    line_no + 1,
                    expected_header.join(",")
                )));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() < required || cells.len() > expected_header.len() {
            return Err(CliError::Data(format!(
                "line {}: expected {}..{} columns, found {}",
                line_no + 1,
                required,
                expected_header.len(),
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, cell) in cells.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "line {}: column '{}' holds '{cell}', not a number",
                    line_no + 1,
                    expected_header[col]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Data(format!(
                    "line {}: column '{}' is not finite",
                    line_no + 1,
                    expected_header[col]
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if !header_seen {
        return Err(CliError::Data(format!("{}: no header row", path.display())));
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok((metadata, rows))
}

/// Serialize a trace: metadata comment, header, then freq_hz,psd rows.
pub fn render_trace(trace: &SpectrumTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# enbw_hz = {}", fmt(trace.enbw()));
    out.push_str("freq_hz,psd\n");
    for (i, value) in trace.values().iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt(trace.frequency(i)), fmt(*value));
    }
    out
}

/// Parse a trace CSV written by [`render_trace`] (or an instrument export
/// following the same shape). The grid must be uniform.
pub fn read_trace(path: &Path) -> Result<SpectrumTrace, CliError> {
    let (metadata, rows) = read_table(path, &["freq_hz", "psd"], 0)?;
    let enbw = metadata
        .iter()
        .find(|(k, _)| k == "enbw_hz")
        .ok_or_else(|| CliError::Data(format!("{}: missing '# enbw_hz = ...' line", path.display())))?
        .1
        .parse::<f64>()
        .map_err(|_| CliError::Data(format!("{}: bad enbw_hz value", path.display())))?;
    if rows.len() < 2 {
        return Err(CliError::Data(format!("{}: need at least two samples", path.display())));
    }
    let f_start = rows[0][0];
    let f_step = (rows[rows.len() - 1][0] - f_start) / (rows.len() - 1) as f64;
    if !f_step.is_finite() || f_step <= 0.0 {
        return Err(CliError::Data(format!("{}: frequency column must increase", path.display())));
    }
    for (i, row) in rows.iter().enumerate() {
        let expected = f_start + i as f64 * f_step;
        if (row[0] - expected).abs() > 1e-6 * f_step.max(1.0) {
            return Err(CliError::Data(format!(
                "row {}: non-uniform frequency grid ({} vs expected {})",
                i + 1,
                row[0],
                expected
            )));
        }
    }
    let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    SpectrumTrace::new(f_start, f_step, values, enbw)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
