//! RDF model, outbreak vocabulary and the Turtle, N-Triples, RDF/XML and CSV forms.

pub mod dataset;
pub mod model;
pub mod rdfxml;
pub mod turtle;
pub mod vocab;

pub use dataset::{emit_csv, parse_csv, CSV_HEADER};
pub use model::{Graph, Iri, Literal, Term, Triple};
pub use rdfxml::{serialize_rdfxml, serialize_rdfxml_with_base};
pub use turtle::{parse_turtle, serialize_ntriples, serialize_turtle, serialize_turtle_with_base};
pub use vocab::{record_to_axioms, schema_axioms, KgConfig};
