//! Turning a raw completion into an [`ExtractionRecord`].

use chrono::NaiveDate;
use serde_json::Value;

use super::{ExtractionRecord, ExtractionStatus};

/// Parses the first JSON object embedded in `raw`.
///
/// Models routinely wrap their answer in prose, so every balanced `{...}`
/// span is tried in order until one parses. Never fails: when no object is
/// found the record comes back empty with [`ExtractionStatus::ParseFailure`].
pub fn parse_model_json(raw: &str, fileid: &str, model_id: &str) -> ExtractionRecord {
    let mut record = ExtractionRecord::empty(fileid, model_id);
    let Some(object) = balanced_objects(raw)
        .filter_map(|span| serde_json::from_str::<Value>(span).ok())
        .find_map(|v| match v {
            Value::Object(map) => Some(map),
            _ => None,
        })
    else {
        record.status = ExtractionStatus::ParseFailure;
        return record;
    };

    for (key, value) in &object {
        let key = normalize_key(key);
        match key.as_str() {
            "disease" | "disease name" | "disease_name" => {
                record.disease = text_value(value);
            }
            "country" => record.country = text_value(value),
            "date" => record.date = text_value(value).and_then(|s| parse_strict_date(&s)),
            "cases" => record.cases = count_value(value),
            "deaths" => record.deaths = count_value(value),
            _ => {}
        }
    }
    record
}

fn normalize_key(key: &str) -> String {
    key.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Byte spans of balanced top-level `{...}` candidates, string-literal aware.
pub(crate) fn balanced_objects(raw: &str) -> impl Iterator<Item = &str> {
    let bytes = raw.as_bytes();
    let mut starts = raw.match_indices('{').map(|(i, _)| i);
    std::iter::from_fn(move || loop {
        let start = starts.next()?;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (offset, &b) in bytes[start..].iter().enumerate() {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(&raw[start..start + offset + 1]);
                    }
                }
                _ => {}
            }
        }
    })
}

fn is_none_marker(s: &str) -> bool {
    let s = s.trim();
    s.is_empty()
        || s.eq_ignore_ascii_case("none")
        || s.eq_ignore_ascii_case("null")
        || s.eq_ignore_ascii_case("n/a")
}

fn text_value(value: &Value) -> Option<String> {
    match value {
        Value::String(s) if !is_none_marker(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn count_value(value: &Value) -> Option<u64> {
    match value {
        Value::Number(n) => n.as_u64().or_else(|| {
            n.as_f64()
                .filter(|f| *f >= 0.0 && f.fract() == 0.0 && *f <= u64::MAX as f64)
                .map(|f| f as u64)
        }),
        Value::String(s) if !is_none_marker(s) => parse_count(s),
        _ => None,
    }
}

/// Digits with optional `,` or thin-space thousands separators.
pub fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim();
    if s.is_empty() || !s.as_bytes()[0].is_ascii_digit() {
        return None;
    }
    let mut digits = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '0'..='9' => digits.push(c),
            ',' | '\u{2009}' | '\u{202f}' | '_' => {}
            _ => return None,
        }
    }
    digits.parse().ok()
}

/// `YYYY-MM-DD` exactly; anything else is rejected.
pub fn parse_strict_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let b = s.as_bytes();
    let shape_ok = b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
    if !shape_ok {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}
