//! Epidemiological knowledge-graph pipeline.
//!
//! Outbreak reports are loaded and chunked ([`corpus`]), sent to several
//! completion backends ([`extract`]), fused by majority voting over synonym
//! clusters ([`ensemble`]), published as RDF ([`kg`]), queried through a
//! SPARQL subset ([`sparql`]) and scored or summarized ([`eval`],
//! [`analytics`]).

pub mod analytics;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod event;
pub mod extract;
pub mod kg;
pub mod pipeline;
pub mod sparql;

pub use corpus::{ChunkingConfig, DonReport};
pub use ensemble::{EnsembleConfig, EnsembleRecord, SynonymDictionaries};
pub use error::{Error, Result};
pub use event::OutbreakEvent;
pub use extract::ExtractionRecord;
pub use kg::{Graph, Iri, KgConfig, Literal, Term, Triple};
pub use sparql::{Query, QueryResult, TripleStore};
