//! RDF/XML writer using the published dataset's namespace block.

use std::fmt::Write as _;

use super::model::{Graph, Term, Triple};
use super::vocab::{self, OWL, OWL_CLASS, RDF, RDFS, RDF_TYPE, SKOS, XML, XSD};
use crate::error::{Error, Result};

pub fn serialize_rdfxml(graph: &Graph) -> Result<String> {
    serialize_rdfxml_with_base(graph, vocab::EKG)
}

pub fn serialize_rdfxml_with_base(graph: &Graph, base: &str) -> Result<String> {
    let namespaces = [
        ("owl", OWL),
        ("rdf", RDF),
        ("xml", XML),
        ("rdfs", RDFS),
        ("xsd", XSD),
        ("skos", SKOS),
        ("obo", vocab::OBO),
    ];
    let mut out = String::from("<?xml version=\"1.0\"?>\n");
    let _ = write!(out, "<rdf:RDF xmlns=\"{}\"\n     xml:base=\"{}\"", attr(base)?, attr(base)?);
    for (prefix, ns) in namespaces {
        let _ = write!(out, "\n     xmlns:{prefix}=\"{ns}\"");
    }
    out.push('>');

    let mut triples = graph.iter().peekable();
    while let Some(first) = triples.next() {
        let mut group: Vec<&Triple> = vec![first];
        while let Some(next) = triples.peek() {
            if next.subject != first.subject {
                break;
            }
            group.push(triples.next().unwrap());
        }
        let is_class = group
            .iter()
            .any(|t| t.predicate.as_str() == RDF_TYPE && t.object.as_iri().is_some_and(|o| o.as_str() == OWL_CLASS));
        let element = if is_class { "owl:Class" } else { "rdf:Description" };
        out.push_str("\n\n");
        let _ = writeln!(out, "    <{element} rdf:about=\"{}\">", attr(first.subject.as_str())?);
        for t in group {
            if is_class && t.predicate.as_str() == RDF_TYPE && t.object.as_iri().is_some_and(|o| o.as_str() == OWL_CLASS) {
                continue;
            }
            out.push_str("        ");
            property(&mut out, t, base, &namespaces)?;
            out.push('\n');
        }
        let _ = write!(out, "    </{element}>");
    }
    out.push_str("\n</rdf:RDF>\n");
    Ok(out)
}

fn property(out: &mut String, t: &Triple, base: &str, namespaces: &[(&str, &str)]) -> Result<()> {
    let iri = t.predicate.as_str();
    let (name, declaration) = qname(iri, base, namespaces)?;
    let _ = write!(out, "<{name}{declaration}");
    match &t.object {
        Term::Iri(o) => {
            let _ = write!(out, " rdf:resource=\"{}\"/>", attr(o.as_str())?);
        }
        Term::Literal(l) => {
            if let Some(lang) = l.language() {
                let _ = write!(out, " xml:lang=\"{}\"", attr(lang)?);
            } else if let Some(dt) = l.datatype() {
                let _ = write!(out, " rdf:datatype=\"{}\"", attr(dt.as_str())?);
            }
            let _ = write!(out, ">{}</{name}>", text(l.lexical())?);
        }
    }
    Ok(())
}

/// Element name for a predicate, plus a local namespace declaration when
/// its namespace is not in the document block.
fn qname(iri: &str, base: &str, namespaces: &[(&str, &str)]) -> Result<(String, String)> {
    if let Some(local) = iri.strip_prefix(base) {
        if is_ncname(local) {
            return Ok((local.to_string(), String::new()));
        }
    }
    for (prefix, ns) in namespaces {
        if let Some(local) = iri.strip_prefix(ns) {
            if is_ncname(local) {
                return Ok((format!("{prefix}:{local}"), String::new()));
            }
        }
    }
    let split = iri
        .char_indices()
        .rev()
        .take_while(|&(_, c)| is_name_char(c))
        .last()
        .map(|(i, _)| i)
        .and_then(|i| iri[i..].char_indices().find(|&(_, c)| is_name_start(c)).map(|(j, _)| i + j))
        .filter(|&i| i > 0)
        .ok_or_else(|| Error::RdfXml(format!("predicate <{iri}> cannot be written as an XML element name")))?;
    let (ns, local) = iri.split_at(split);
    Ok((format!("ns0:{local}"), format!(" xmlns:ns0=\"{}\"", attr(ns)?)))
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

fn is_ncname(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_name_start) && chars.all(is_name_char)
}

fn check_xml_char(c: char) -> Result<()> {
    let ok = matches!(c, '\t' | '\n' | '\r') || (c >= ' ' && c != '\u{fffe}' && c != '\u{ffff}');
    if ok {
        Ok(())
    } else {
        Err(Error::RdfXml(format!("character U+{:04X} cannot appear in XML 1.0", c as u32)))
    }
}

fn text(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        check_xml_char(c)?;
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    Ok(out)
}

fn attr(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        check_xml_char(c)?;
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            '\n' => out.push_str("&#10;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::model::Literal;
    use crate::kg::vocab::{KgConfig, EKG};
    use crate::OutbreakEvent;

    #[test]
    fn empty_graph_is_root_only() {
        let xml = serialize_rdfxml(&Graph::new("g")).unwrap();
        assert!(xml.starts_with("<?xml version=\"1.0\"?>\n<rdf:RDF xmlns=\""));
        assert!(xml.trim_end().ends_with("</rdf:RDF>"));
        assert!(!xml.contains("rdf:Description") && !xml.contains("owl:Class "));
    }

    #[test]
    fn nipah_block() {
        let mut event = OutbreakEvent::new("31-may-2018-nipah-virus-india-en");
        event.disease = Some("Nipah Virus".into());
        event.date = chrono::NaiveDate::from_ymd_opt(2018, 5, 19);
        let g = KgConfig::default().build_graph([&event]);
        let xml = serialize_rdfxml(&g).unwrap();
        assert!(xml.contains(&format!("<owl:Class rdf:about=\"{EKG}don-record1\">")));
        assert!(xml.contains("<virus_extracted>Nipah Virus</virus_extracted>"));
        assert!(xml.contains(
            "<date_extracted rdf:datatype=\"http://www.w3.org/2001/XMLSchema#date\">2018-05-19</date_extracted>"
        ));
        assert!(xml.contains("<rdfs:subClassOf rdf:resource=\"http://purl.obolibrary.org/obo/IDO_0000436\"/>"));
    }

    #[test]
    fn escapes_and_foreign_predicates() {
        let mut g = Graph::new("g");
        g.insert(Triple::new("http://e/s", "http://other.org/ns#p", Literal::plain("a<b & \"c\"\r")));
        g.insert(Triple::new("http://e/s", "http://other.org/q", Literal::lang("x", "en")));
        let xml = serialize_rdfxml(&g).unwrap();
        assert!(xml.contains("<ns0:p xmlns:ns0=\"http://other.org/ns#\">a&lt;b &amp; \"c\"&#13;</ns0:p>"));
        assert!(xml.contains("xml:lang=\"en\""));
        let mut bad = Graph::new("g");
        bad.insert(Triple::new("http://e/s", "http://e/1", Literal::plain("x")));
        assert!(serialize_rdfxml(&bad).is_err());
    }
}
