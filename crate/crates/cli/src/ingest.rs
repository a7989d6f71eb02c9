//! CSV input and output.
//!
//! Input is comma separated with one observation per row. A first row that
//! contains any non-numeric field is taken as a header. Rows and columns in
//! error messages are 1-based and count the header line.

use std::io::{Read, Write};
use std::path::Path;

use hdustat::Sample;

use crate::error::{CliError, CliResult};

fn data_err<T>(msg: String) -> CliResult<T> {
    Err(CliError::Data(msg))
}

pub fn read_csv(path: &Path) -> CliResult<Sample> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(file).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv<R: Read>(input: R) -> CliResult<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut data = Vec::new();
    let mut width = None;
    let mut n = 0;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {line}: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        if idx == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return data_err(format!(
                    "row {line} has {} fields, expected {w}",
                    record.len()
                ));
            }
            _ => {}
        }
        for (col, (field, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => data.push(v),
                Some(_) => {
                    return data_err(format!(
                        "row {line}, column {}: non-finite value `{field}`",
                        col + 1
                    ))
                }
                None => {
                    return data_err(format!(
                        "row {line}, column {}: not a number `{field}`",
                        col + 1
                    ))
                }
            }
        }
        n += 1;
    }
    let Some(p) = width else {
        return data_err("no data rows".into());
    };
    if n < 2 {
        return data_err(format!("need at least 2 data rows, found {n}"));
    }
    Ok(Sample::new(data, n, p)?)
}

/// Writes one row per observation with 17 significant digits, which
/// reproduces every `f64` exactly on reading.
pub fn write_csv<W: Write>(sample: &Sample, out: W) -> CliResult<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    for row in sample.rows() {
        writer
            .write_record(row.iter().map(|v| format!("{v:.16e}")))
            .map_err(io)?;
    }
    writer.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_csv_file(sample: &Sample, path: &Path) -> CliResult<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    write_csv(sample, std::io::BufWriter::new(file))
}
