//! Result serializations: SPARQL JSON and XML, CSV and an HTML table.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use super::eval::QueryResult;
use crate::kg::Term;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResultFormat {
    Json,
    Xml,
    Csv,
    Html,
}

impl ResultFormat {
    pub const ALL: [ResultFormat; 4] = [ResultFormat::Json, ResultFormat::Xml, ResultFormat::Csv, ResultFormat::Html];

    pub fn media_type(self) -> &'static str {
        match self {
            ResultFormat::Json => "application/json",
            ResultFormat::Xml => "application/xml",
            ResultFormat::Csv => "text/csv",
            ResultFormat::Html => "text/html",
        }
    }

    /// Exact media-type match, including the SPARQL-results specific types.
    pub fn from_media_type(media: &str) -> Option<Self> {
        match media.trim().to_ascii_lowercase().as_str() {
            "application/json" | "application/sparql-results+json" => Some(ResultFormat::Json),
            "application/xml" | "application/sparql-results+xml" | "text/xml" => Some(ResultFormat::Xml),
            "text/csv" => Some(ResultFormat::Csv),
            "text/html" => Some(ResultFormat::Html),
            _ => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "json" => Some(ResultFormat::Json),
            "xml" => Some(ResultFormat::Xml),
            "csv" => Some(ResultFormat::Csv),
            "html" => Some(ResultFormat::Html),
            _ => None,
        }
    }
}

pub fn serialize_results(result: &QueryResult, format: ResultFormat) -> String {
    let vars = result.vars();
    let rows = result.rows();
    match format {
        ResultFormat::Json => to_json(&vars, &rows),
        ResultFormat::Xml => to_xml(&vars, &rows),
        ResultFormat::Csv => to_csv(&vars, &rows),
        ResultFormat::Html => to_html(&vars, &rows),
    }
}

fn json_term(term: &Term) -> Value {
    match term {
        Term::Iri(i) => json!({"type": "uri", "value": i.as_str()}),
        Term::Literal(l) => {
            let mut obj = Map::new();
            obj.insert("type".into(), "literal".into());
            obj.insert("value".into(), l.lexical().into());
            if let Some(lang) = l.language() {
                obj.insert("xml:lang".into(), lang.into());
            } else if let Some(dt) = l.datatype() {
                obj.insert("datatype".into(), dt.as_str().into());
            }
            Value::Object(obj)
        }
    }
}

fn to_json(vars: &[String], rows: &[Vec<Option<Term>>]) -> String {
    let bindings: Vec<Value> = rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = vars
                .iter()
                .zip(row)
                .filter_map(|(v, t)| t.as_ref().map(|t| (v.clone(), json_term(t))))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let doc = json!({"head": {"vars": vars}, "results": {"bindings": bindings}});
    serde_json::to_string_pretty(&doc).expect("JSON values serialize")
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n') => out.push('\u{fffd}'),
            c => out.push(c),
        }
    }
    out
}

fn to_xml(vars: &[String], rows: &[Vec<Option<Term>>]) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\"?>\n<sparql xmlns=\"http://www.w3.org/2005/sparql-results#\">\n  <head>\n",
    );
    for v in vars {
        let _ = writeln!(out, "    <variable name=\"{}\"/>", xml_escape(v));
    }
    out.push_str("  </head>\n  <results>\n");
    for row in rows {
        out.push_str("    <result>\n");
        for (v, t) in vars.iter().zip(row) {
            let Some(t) = t else { continue };
            let _ = write!(out, "      <binding name=\"{}\">", xml_escape(v));
            match t {
                Term::Iri(i) => {
                    let _ = write!(out, "<uri>{}</uri>", xml_escape(i.as_str()));
                }
                Term::Literal(l) => {
                    out.push_str("<literal");
                    if let Some(lang) = l.language() {
                        let _ = write!(out, " xml:lang=\"{}\"", xml_escape(lang));
                    } else if let Some(dt) = l.datatype() {
                        let _ = write!(out, " datatype=\"{}\"", xml_escape(dt.as_str()));
                    }
                    let _ = write!(out, ">{}</literal>", xml_escape(l.lexical()));
                }
            }
            out.push_str("</binding>\n");
        }
        out.push_str("    </result>\n");
    }
    out.push_str("  </results>\n</sparql>\n");
    out
}

fn to_csv(vars: &[String], rows: &[Vec<Option<Term>>]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    writer.write_record(vars).expect("writing to memory");
    for row in rows {
        writer
            .write_record(row.iter().map(|t| t.as_ref().map_or("", Term::str_value)))
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("input was UTF-8")
}

fn to_html(vars: &[String], rows: &[Vec<Option<Term>>]) -> String {
    let mut out = String::from("<table class=\"sparql\">\n  <tr>");
    for v in vars {
        let _ = write!(out, "<th>{}</th>", html_escape::encode_text(v));
    }
    out.push_str("</tr>\n");
    for row in rows {
        out.push_str("  <tr>");
        for t in row {
            let cell = t.as_ref().map_or("", Term::str_value);
            let _ = write!(out, "<td>{}</td>", html_escape::encode_text(cell));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
    out
}
