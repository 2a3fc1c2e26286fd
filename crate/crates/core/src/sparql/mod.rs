//! Named-graph store and the query subset it answers.

pub mod ast;
pub mod eval;
pub mod parser;
pub mod results;
pub mod store;

pub use ast::{print_query, Direction, FilterExpr, Operand, OrderKey, PatternTerm, Projection, Query, QueryForm, TriplePattern};
pub use eval::{build_regex, date_year, equals_matches, evaluate, QueryResult};
pub use parser::parse_query;
pub use results::{serialize_results, ResultFormat};
pub use store::{TermId, TripleStore};
