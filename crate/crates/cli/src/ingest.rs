//! CSV ingestion: a header row with a date column and a value column.
//! Price series are converted to hundredfold log-returns
//! x_t = 100·(ln p_t − ln p_{t−1}); return series pass through.

use std::path::Path;

use crate::config::Mode;
use crate::CliError;

pub struct Ingested {
    pub dates: Vec<String>,
    pub values: Vec<f64>,
    /// Rows dropped because the value field was missing.
    pub dropped: usize,
}

const MIN_OBSERVATIONS: usize = 50;

pub fn ingest(
    path: &Path,
    mode: Mode,
    date_col: &str,
    value_col: &str,
) -> Result<Ingested, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header: {e}")))?
        .clone();
    let date_idx = headers.iter().position(|h| h == date_col).ok_or_else(|| {
        CliError::Data(format!("column `{date_col}` not found in {}", path.display()))
    })?;
    let value_idx = headers.iter().position(|h| h == value_col).ok_or_else(|| {
        CliError::Data(format!("column `{value_col}` not found in {}", path.display()))
    })?;

    let mut dates = Vec::new();
    let mut raw = Vec::new();
    let mut dropped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, counting the header line
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        let value_field = record.get(value_idx).unwrap_or("").trim();
        if value_field.is_empty() || value_field.eq_ignore_ascii_case("na")
            || value_field.eq_ignore_ascii_case("nan")
        {
            dropped += 1;
            continue;
        }
        let value: f64 = value_field
            .parse()
            .map_err(|_| CliError::Data(format!("row {row}: non-numeric value `{value_field}`")))?;
        if !value.is_finite() {
            return Err(CliError::Data(format!("row {row}: non-finite value `{value_field}`")));
        }
        dates.push(record.get(date_idx).unwrap_or("").trim().to_string());
        raw.push((row, value));
    }
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} rows with missing values");
    }

    let (dates, values) = match mode {
        Mode::Returns => (dates, raw.into_iter().map(|(_, v)| v).collect::<Vec<f64>>()),
        Mode::Prices => {
            let mut out_dates = Vec::new();
            let mut out_values = Vec::new();
            for w in raw.windows(2) {
                let ((_, prev), (row, cur)) = (w[0], w[1]);
                if prev <= 0.0 || cur <= 0.0 {
                    return Err(CliError::Data(format!(
                        "row {row}: prices must be positive to take log-returns"
                    )));
                }
                out_values.push(100.0 * (cur.ln() - prev.ln()));
            }
            // Return at t is dated by the later observation.
            for d in dates.into_iter().skip(1) {
                out_dates.push(d);
            }
            (out_dates, out_values)
        }
    };

    if values.len() < MIN_OBSERVATIONS {
        return Err(CliError::Data(format!(
            "series has {} usable observations; at least {MIN_OBSERVATIONS} are required",
            values.len()
        )));
    }
    Ok(Ingested { dates, values, dropped })
}
