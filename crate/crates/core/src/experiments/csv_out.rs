use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a value rounded to 10 significant digits, printed in the
/// shortest form that reads back to the rounded value.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.9e}").parse().unwrap_or(v);
    // avoid "-0"
    if rounded == 0.0 {
        return "0".into();
    }
    if rounded.abs() < 1e-4 || rounded.abs() >= 1e15 {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

/// Writes `header` then `rows` as comma-separated, RFC 4180 quoted CSV.
pub fn emit_csv<S: AsRef<str>>(header: &[S], rows: &[Vec<String>], path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    writer.write_record(header.iter().map(|s| s.as_ref()))?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer
        .into_inner()
        .map_err(|e| io_err(e.into_error()))?
        .flush()
        .map_err(io_err)
}

/// Reads a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
