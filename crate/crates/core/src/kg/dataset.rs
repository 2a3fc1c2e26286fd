//! The flat CSV form of the dataset.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::event::OutbreakEvent;
use crate::extract::parse_count;

pub const CSV_HEADER: [&str; 7] = [
    "fileid",
    "virus_extracted",
    "country_extracted",
    "date_extracted",
    "date_cases_Imputed",
    "cases_extracted",
    "deaths_extracted",
];

fn csv_date(d: Option<NaiveDate>) -> String {
    d.map(|d| d.format("%Y/%m/%d").to_string()).unwrap_or_default()
}

fn csv_count(n: Option<u64>) -> String {
    n.map(|n| n.to_string()).unwrap_or_default()
}

/// Header plus one row per event, LF line endings, dates as `YYYY/MM/DD`.
pub fn emit_csv<'a>(events: impl IntoIterator<Item = &'a OutbreakEvent>) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("writing to memory");
    for e in events {
        writer
            .write_record([
                e.fileid.clone(),
                e.disease.clone().unwrap_or_default(),
                e.country.clone().unwrap_or_default(),
                csv_date(e.date),
                csv_date(e.imputed_date),
                csv_count(e.cases),
                csv_count(e.deaths),
            ])
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("input was UTF-8")
}

/// Accepted header names per field, first being the canonical one.
const COLUMN_ALIASES: [&[&str]; 7] = [
    &["fileid", "id"],
    &["virus_extracted", "disease", "virus", "disease_name"],
    &["country_extracted", "country"],
    &["date_extracted", "date"],
    &["date_cases_imputed", "imputed_date"],
    &["cases_extracted", "cases"],
    &["deaths_extracted", "deaths"],
];

fn is_absent(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || ["none", "null", "nan", "n/a", "na"].iter().any(|m| t.eq_ignore_ascii_case(m))
}

fn parse_csv_date(cell: &str) -> Option<NaiveDate> {
    let head = cell.trim().get(..10)?;
    NaiveDate::parse_from_str(head, "%Y/%m/%d")
        .or_else(|_| NaiveDate::parse_from_str(head, "%Y-%m-%d"))
        .ok()
}

fn parse_csv_count(cell: &str) -> Option<u64> {
    let t = cell.trim();
    parse_count(t).or_else(|| {
        let f: f64 = t.parse().ok()?;
        (f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64).then_some(f as u64)
    })
}

/// Reads a dataset or gold CSV. Columns are located by header name, so
/// extra columns and a missing deaths column are accepted; LF and CRLF
/// endings and both `YYYY/MM/DD` and `YYYY-MM-DD` dates are read.
pub fn parse_csv(text: &str) -> Result<Vec<OutbreakEvent>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let position = |aliases: &[&str]| {
        headers
            .iter()
            .position(|h| aliases.iter().any(|a| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(a)))
    };
    let columns: Vec<Option<usize>> = COLUMN_ALIASES.iter().map(|a| position(a)).collect();
    let Some(fileid_col) = columns[0] else {
        return Err(Error::Csv("missing fileid column".into()));
    };

    let mut events = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Csv(e.to_string()))?;
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let cell = |field: usize| columns[field].and_then(|c| row.get(c)).filter(|c| !is_absent(c));
        let fileid = row.get(fileid_col).unwrap_or("").trim();
        if fileid.is_empty() {
            return Err(Error::Csv(format!("row {} has no fileid", i + 2)));
        }
        let invalid = |what: &str, value: &str| Error::InvalidRecord {
            id: fileid.to_string(),
            message: format!("unreadable {what} {value:?}"),
        };
        let date = |field: usize, what: &str| -> Result<Option<NaiveDate>> {
            cell(field).map(|c| parse_csv_date(c).ok_or_else(|| invalid(what, c))).transpose()
        };
        let count = |field: usize, what: &str| -> Result<Option<u64>> {
            cell(field).map(|c| parse_csv_count(c).ok_or_else(|| invalid(what, c))).transpose()
        };
        events.push(OutbreakEvent {
            fileid: fileid.to_string(),
            disease: cell(1).map(str::to_string),
            country: cell(2).map(str::to_string),
            date: date(3, "date")?,
            imputed_date: date(4, "imputed date")?,
            cases: count(5, "cases")?,
            deaths: count(6, "deaths")?,
        });
    }
    Ok(events)
}
