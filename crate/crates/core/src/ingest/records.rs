use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One street-level event as read from the raw archive.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub longitude: f64,
    pub latitude: f64,
    /// Monthly archives resolve to the first day of the month.
    pub date: NaiveDate,
    pub crime_type: String,
}

/// Column names and delimiter of a raw event file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub longitude: String,
    pub latitude: String,
    pub date: String,
    pub crime_type: String,
    pub delimiter: char,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            longitude: "Longitude".into(),
            latitude: "Latitude".into(),
            date: "Month".into(),
            crime_type: "Crime type".into(),
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<EventRecord>,
    pub dropped: usize,
}

/// Accepts `YYYY-MM-DD` and `YYYY-MM`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .or_else(|| NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d").ok())
}

/// Reads delimiter-separated events, dropping rows that lack a usable
/// coordinate, date or type. Row order is preserved.
pub fn parse_records<R: Read>(source: R, schema: &Schema) -> Result<ParseOutcome> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::InvalidParameter(
            "delimiter must be a single ASCII character".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let lon_ix = column(&schema.longitude)?;
    let lat_ix = column(&schema.latitude)?;
    let date_ix = column(&schema.date)?;
    let type_ix = column(&schema.crime_type)?;

    let mut out = ParseOutcome::default();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                out.dropped += 1;
                continue;
            }
        };
        match parse_row(&row, lon_ix, lat_ix, date_ix, type_ix) {
            Some(rec) => out.records.push(rec),
            None => out.dropped += 1,
        }
    }
    if out.dropped > 0 {
        log::info!(
            "dropped {} malformed rows, kept {}",
            out.dropped,
            out.records.len()
        );
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    lon_ix: usize,
    lat_ix: usize,
    date_ix: usize,
    type_ix: usize,
) -> Option<EventRecord> {
    let longitude: f64 = row.get(lon_ix)?.trim().parse().ok()?;
    let latitude: f64 = row.get(lat_ix)?.trim().parse().ok()?;
    if !(longitude.is_finite() && (-180.0..=180.0).contains(&longitude)) {
        return None;
    }
    if !(latitude.is_finite() && (-90.0..=90.0).contains(&latitude)) {
        return None;
    }
    let date = parse_date(row.get(date_ix)?)?;
    let crime_type = row.get(type_ix)?.trim();
    if crime_type.is_empty() {
        return None;
    }
    Some(EventRecord {
        longitude,
        latitude,
        date,
        crime_type: crime_type.to_string(),
    })
}
