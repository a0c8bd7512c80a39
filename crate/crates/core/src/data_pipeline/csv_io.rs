use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use super::{RawKind, RawSeries};
use crate::error::{Error, Result};
use crate::payoff_analytics::format_f64;

#[derive(Debug, Deserialize)]
struct Row {
    date: String,
    value: f64,
}

/// Reads a `date,value` CSV with ISO-8601 dates.
pub fn read_series_csv<R: Read>(input: R, kind: RawKind) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "value"] {
        return Err(Error::Data(format!(
            "expected header `date,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| Error::Data(format!("row {}: bad date {:?}: {e}", line + 2, row.date)))?;
        records.push((date, row.value));
    }
    RawSeries::from_records(kind, records)
}

impl RawSeries {
    pub fn read_csv_file(path: &Path, kind: RawKind) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        read_series_csv(f, kind)
    }
}

pub fn write_series_csv<W: Write>(series: &RawSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "value"])?;
    for (d, &v) in series.dates.iter().zip(&series.values) {
        w.write_record([d.format("%Y-%m-%d").to_string(), format_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}
