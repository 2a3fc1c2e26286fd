//! Vocabulary of the outbreak graph and the mapping from records to axioms.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::model::{Graph, Iri, Literal, Term, Triple};
use crate::event::OutbreakEvent;

pub const EKG: &str = "http://data.jrc.ec.europa.eu/dataset/89056048-7f5d-4d7c-96ad-f99d1c0f6601/";
pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const XML: &str = "http://www.w3.org/XML/1998/namespace";
pub const SKOS: &str = "http://www.w3.org/2004/02/skos/core#";
pub const OBO: &str = "http://purl.obolibrary.org/obo/";
pub const DCTERMS: &str = "http://purl.org/dc/terms/";

/// Name under which the outbreak graph is loaded (`FROM <eKG>`).
pub const DEFAULT_GRAPH: &str = "eKG";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
pub const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
pub const XSD_DATE: &str = "http://www.w3.org/2001/XMLSchema#date";

/// Prefixes written by the Turtle serializer, in output order.
pub fn prefixes(base: &str) -> Vec<(&'static str, String)> {
    vec![
        ("eKG", base.to_string()),
        ("owl", OWL.to_string()),
        ("rdf", RDF.to_string()),
        ("rdfs", RDFS.to_string()),
        ("xsd", XSD.to_string()),
        ("skos", SKOS.to_string()),
        ("obo", OBO.to_string()),
        ("dcterms", DCTERMS.to_string()),
    ]
}

/// The six per-field properties, with the external class each specializes.
pub const FIELD_CLASSES: [(&str, &str); 6] = [
    ("virus_extracted", "http://purl.obolibrary.org/obo/IDO_0000436"),
    ("country_extracted", "http://purl.obolibrary.org/obo/GEO_000000372"),
    ("date_extracted", "http://purl.org/dc/terms/date"),
    ("date_cases_Imputed", "http://purl.org/dc/terms/date"),
    ("cases_extracted", "http://purl.obolibrary.org/obo/IDO_0000511"),
    ("deaths_extracted", "http://purl.obolibrary.org/obo/IDO_0000489"),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KgConfig {
    /// Namespace for records and properties; ends with `/`.
    pub base_iri: String,
    /// Class every outbreak record specializes.
    pub superclass: String,
    pub graph_name: String,
    /// Sequence number given to the first record.
    pub first_seq: usize,
}

impl Default for KgConfig {
    fn default() -> Self {
        KgConfig {
            base_iri: EKG.to_string(),
            superclass: format!("{EKG}Surveillance_process"),
            graph_name: DEFAULT_GRAPH.to_string(),
            first_seq: 1,
        }
    }
}

impl KgConfig {
    pub fn property(&self, local: &str) -> Iri {
        Iri::new(format!("{}{local}", self.base_iri))
    }

    pub fn record_iri(&self, seq: usize) -> Iri {
        Iri::new(format!("{}don-record{seq}", self.base_iri))
    }

    /// Sequence number of a `don-record<N>` IRI under this base.
    pub fn record_seq(&self, iri: &str) -> Option<usize> {
        iri.strip_prefix(&self.base_iri)?
            .strip_prefix("don-record")?
            .parse()
            .ok()
    }

    pub fn schema_axioms(&self) -> Vec<Triple> {
        FIELD_CLASSES
            .iter()
            .map(|(local, class)| Triple::new(self.property(local), RDFS_SUBCLASS_OF, Term::iri(*class)))
            .collect()
    }

    /// Triples for one record: type, superclass, label, then one per populated field.
    pub fn record_to_axioms(&self, event: &OutbreakEvent, seq: usize) -> Vec<Triple> {
        let subject = self.record_iri(seq);
        let mut out = vec![
            Triple::new(subject.clone(), RDF_TYPE, Term::iri(OWL_CLASS)),
            Triple::new(subject.clone(), RDFS_SUBCLASS_OF, Term::iri(self.superclass.clone())),
            Triple::new(subject.clone(), RDFS_LABEL, Term::literal(event.fileid.clone())),
        ];
        let mut field = |local: &str, value: Option<Term>| {
            if let Some(v) = value {
                out.push(Triple::new(subject.clone(), self.property(local), v));
            }
        };
        field("virus_extracted", event.disease.clone().map(Term::literal));
        field("country_extracted", event.country.clone().map(Term::literal));
        field("date_extracted", event.date.map(|d| Literal::date(d).into()));
        field("date_cases_Imputed", event.imputed_date.map(|d| Literal::date(d).into()));
        field("cases_extracted", event.cases.map(|n| Term::literal(n.to_string())));
        field("deaths_extracted", event.deaths.map(|n| Term::literal(n.to_string())));
        out
    }

    /// Schema axioms plus every record, numbered from 1 in input order.
    pub fn build_graph<'a>(&self, events: impl IntoIterator<Item = &'a OutbreakEvent>) -> Graph {
        let mut graph = Graph::new(self.graph_name.clone());
        graph.extend(self.schema_axioms());
        for (i, event) in events.into_iter().enumerate() {
            graph.extend(self.record_to_axioms(event, self.first_seq + i));
        }
        graph
    }

    /// Reads outbreak records back out of a graph, keyed by sequence number.
    pub fn events_from_graph(&self, graph: &Graph) -> BTreeMap<usize, OutbreakEvent> {
        let mut events: BTreeMap<usize, OutbreakEvent> = BTreeMap::new();
        for t in graph {
            let Some(seq) = self.record_seq(t.subject.as_str()) else {
                continue;
            };
            let event = events.entry(seq).or_default();
            let value = t.object.str_value();
            let Some(local) = t.predicate.as_str().strip_prefix(&self.base_iri) else {
                if t.predicate.as_str() == RDFS_LABEL {
                    event.fileid = value.to_string();
                }
                continue;
            };
            match local {
                "virus_extracted" => event.disease = Some(value.to_string()),
                "country_extracted" => event.country = Some(value.to_string()),
                "date_extracted" => event.date = parse_iso_date(value),
                "date_cases_Imputed" => event.imputed_date = parse_iso_date(value),
                "cases_extracted" => event.cases = value.trim().parse().ok(),
                "deaths_extracted" => event.deaths = value.trim().parse().ok(),
                _ => {}
            }
        }
        events
    }
}

fn parse_iso_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.get(..10)?, "%Y-%m-%d").ok()
}

pub fn schema_axioms() -> Vec<Triple> {
    KgConfig::default().schema_axioms()
}

pub fn record_to_axioms(event: &OutbreakEvent, seq: usize) -> Vec<Triple> {
    KgConfig::default().record_to_axioms(event, seq)
}
