//! Evaluation of parsed queries against a store snapshot.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use regex::{Regex, RegexBuilder};

use super::ast::{Direction, FilterExpr, Operand, PatternTerm, Projection, Query, QueryForm};
use super::store::{TermId, TripleStore};
use crate::kg::vocab::XSD;
use crate::kg::{Literal, Term, Triple};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryResult {
    /// Rows in solution order; `None` marks an unbound variable.
    Solutions {
        vars: Vec<String>,
        rows: Vec<Vec<Option<Term>>>,
    },
    Count { var: String, count: u64 },
    Graph(Vec<Triple>),
}

impl QueryResult {
    pub fn vars(&self) -> Vec<String> {
        match self {
            QueryResult::Solutions { vars, .. } => vars.clone(),
            QueryResult::Count { var, .. } => vec![var.clone()],
            QueryResult::Graph(_) => vec!["s".into(), "p".into(), "o".into()],
        }
    }

    /// Every result as a table of optional terms.
    pub fn rows(&self) -> Vec<Vec<Option<Term>>> {
        match self {
            QueryResult::Solutions { rows, .. } => rows.clone(),
            QueryResult::Count { count, .. } => {
                vec![vec![Some(Literal::typed(count.to_string(), format!("{XSD}integer")).into())]]
            }
            QueryResult::Graph(triples) => triples
                .iter()
                .map(|t| {
                    vec![
                        Some(Term::Iri(t.subject.clone())),
                        Some(Term::Iri(t.predicate.clone())),
                        Some(t.object.clone()),
                    ]
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            QueryResult::Solutions { rows, .. } => rows.len(),
            QueryResult::Count { .. } => 1,
            QueryResult::Graph(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn is_numeric(l: &Literal) -> bool {
    l.datatype().is_some_and(|dt| {
        dt.as_str()
            .strip_prefix(XSD)
            .is_some_and(|local| matches!(local, "integer" | "decimal" | "double" | "float" | "int" | "long"))
    })
}

/// `left = right` where `left` is the binding of the filter variable.
pub fn equals_matches(bound: &Term, left_is_str: bool, right: &Term) -> bool {
    match right {
        Term::Iri(r) => {
            if left_is_str {
                bound.str_value() == r.as_str()
            } else {
                bound == right
            }
        }
        Term::Literal(r) => {
            let lhs = match (left_is_str, bound) {
                (true, t) => t.str_value(),
                (false, Term::Literal(l)) => l.lexical(),
                (false, Term::Iri(_)) => return false,
            };
            if is_numeric(r) {
                match (lhs.trim().parse::<f64>(), r.lexical().parse::<f64>()) {
                    (Ok(a), Ok(b)) => a == b,
                    _ => false,
                }
            } else {
                lhs == r.lexical()
            }
        }
    }
}

/// Year of an `xsd:date` or `xsd:dateTime` literal.
pub fn date_year(term: &Term) -> Option<i64> {
    let lit = term.as_literal()?;
    let dt = lit.datatype()?.as_str().strip_prefix(XSD)?;
    if dt != "date" && dt != "dateTime" {
        return None;
    }
    let lex = lit.lexical().trim();
    let (sign, body) = match lex.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, lex),
    };
    let digits = body.split('-').next()?;
    if digits.len() < 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<i64>().ok().map(|y| sign * y)
}

pub fn build_regex(pattern: &str, flags: &str) -> Option<Regex> {
    RegexBuilder::new(pattern)
        .case_insensitive(flags.contains('i'))
        .multi_line(flags.contains('m'))
        .dot_matches_new_line(flags.contains('s'))
        .ignore_whitespace(flags.contains('x'))
        .build()
        .ok()
}

enum Compiled<'q> {
    Equals { str_coerce: bool, right: &'q Term },
    Regex(Option<Regex>),
    Year(i64),
}

struct Filter<'q> {
    slot: usize,
    test: Compiled<'q>,
}

impl Filter<'_> {
    fn accepts(&self, term: &Term) -> bool {
        match &self.test {
            Compiled::Equals { str_coerce, right } => equals_matches(term, *str_coerce, right),
            Compiled::Regex(re) => re.as_ref().is_some_and(|re| re.is_match(term.str_value())),
            Compiled::Year(y) => date_year(term) == Some(*y),
        }
    }
}

enum Slot {
    Var(usize),
    Const(TermId),
}

type Row = Vec<Option<TermId>>;

fn compare_terms(a: Option<&Term>, b: Option<&Term>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(Term::Iri(_)), Some(Term::Literal(_))) => Ordering::Less,
        (Some(Term::Literal(_)), Some(Term::Iri(_))) => Ordering::Greater,
        (Some(x), Some(y)) => {
            // Numeric lexical forms sort before all others so the order stays total.
            let (sx, sy) = (x.str_value(), y.str_value());
            match (sx.trim().parse::<f64>(), sy.trim().parse::<f64>()) {
                (Ok(a), Ok(b)) => a.total_cmp(&b).then(sx.cmp(sy)),
                (Ok(_), Err(_)) => Ordering::Less,
                (Err(_), Ok(_)) => Ordering::Greater,
                _ => sx.cmp(sy),
            }
        }
    }
}

/// Solutions of the basic graph pattern with every filter applied, before
/// ordering and projection. Variables are indexed by `query.pattern_vars()`.
fn solve(query: &Query, store: &TripleStore) -> Vec<Row> {
    let vars = query.pattern_vars();
    let slot_of = |v: &str| vars.iter().position(|x| x == v).expect("validated variable");
    let index = store.dataset(&query.from);

    let mut compiled: Vec<Option<Filter>> = query
        .filters
        .iter()
        .map(|f| {
            let test = match f {
                FilterExpr::Equals { left, right } => Compiled::Equals {
                    str_coerce: matches!(left, Operand::Str(_)),
                    right,
                },
                FilterExpr::Regex { pattern, flags, .. } => Compiled::Regex(build_regex(pattern, flags)),
                FilterExpr::YearEquals { year, .. } => Compiled::Year(*year),
            };
            Some(Filter { slot: slot_of(f.var()), test })
        })
        .collect();

    let mut rows: Vec<Row> = vec![vec![None; vars.len()]];
    let mut bound: HashSet<usize> = HashSet::new();
    for pattern in &query.patterns {
        let slot = |t: &PatternTerm| -> Option<Slot> {
            match t {
                PatternTerm::Var(v) => Some(Slot::Var(slot_of(v))),
                PatternTerm::Term(term) => store.id(term).map(Slot::Const),
            }
        };
        let (Some(s), Some(p), Some(o)) = (slot(&pattern.subject), slot(&pattern.predicate), slot(&pattern.object))
        else {
            return Vec::new();
        };
        let positions = [s, p, o];
        let mut next = Vec::new();
        for row in &rows {
            let value = |sl: &Slot| match sl {
                Slot::Const(id) => Some(*id),
                Slot::Var(i) => row[*i],
            };
            'matches: for (ms, mp, mo) in index.scan(value(&positions[0]), value(&positions[1]), value(&positions[2])) {
                let mut extended = row.clone();
                for (sl, value) in positions.iter().zip([ms, mp, mo]) {
                    if let Slot::Var(i) = sl {
                        match extended[*i] {
                            Some(existing) if existing != value => continue 'matches,
                            _ => extended[*i] = Some(value),
                        }
                    }
                }
                next.push(extended);
            }
        }
        rows = next;

        bound.extend(pattern.vars().map(slot_of));
        for entry in compiled.iter_mut() {
            if entry.as_ref().is_some_and(|f| bound.contains(&f.slot)) {
                let filter = entry.take().expect("checked above");
                rows.retain(|r| r[filter.slot].is_some_and(|id| filter.accepts(store.term(id))));
            }
        }
        if rows.is_empty() {
            return rows;
        }
    }
    if compiled.iter().any(Option::is_some) {
        // A filter over a variable no pattern binds rejects every row.
        return Vec::new();
    }
    rows
}

pub fn evaluate(query: &Query, store: &TripleStore) -> QueryResult {
    let vars = query.pattern_vars();
    let mut rows = solve(query, store);

    match &query.form {
        QueryForm::Describe(targets) => {
            let mut subjects: BTreeSet<TermId> = BTreeSet::new();
            let targets: Vec<PatternTerm> = if targets.is_empty() {
                vars.iter().cloned().map(PatternTerm::Var).collect()
            } else {
                targets.clone()
            };
            for t in &targets {
                match t {
                    PatternTerm::Term(term) => {
                        if let Some(id) = store.id(term) {
                            if !rows.is_empty() {
                                subjects.insert(id);
                            }
                        }
                    }
                    PatternTerm::Var(v) => {
                        let i = vars.iter().position(|x| x == v).expect("validated variable");
                        subjects.extend(rows.iter().filter_map(|r| r[i]));
                    }
                }
            }
            let index = store.dataset(&query.from);
            let triples = subjects
                .into_iter()
                .filter(|&id| matches!(store.term(id), Term::Iri(_)))
                .flat_map(|id| index.scan(Some(id), None, None).collect::<Vec<_>>())
                .map(|k| store.resolve(k))
                .collect();
            QueryResult::Graph(triples)
        }
        QueryForm::Select { distinct, projection } => {
            if let Projection::CountStar { alias } = projection {
                return QueryResult::Count {
                    var: alias.clone().unwrap_or_else(|| "count".into()),
                    count: rows.len() as u64,
                };
            }
            if !query.order_by.is_empty() {
                let keys: Vec<(usize, Direction)> = query
                    .order_by
                    .iter()
                    .map(|k| (vars.iter().position(|x| *x == k.var).expect("validated"), k.direction))
                    .collect();
                rows.sort_by(|a, b| {
                    keys.iter()
                        .map(|&(i, dir)| {
                            let ord = compare_terms(a[i].map(|id| store.term(id)), b[i].map(|id| store.term(id)));
                            if dir == Direction::Desc {
                                ord.reverse()
                            } else {
                                ord
                            }
                        })
                        .find(|o| o.is_ne())
                        .unwrap_or(Ordering::Equal)
                });
            }
            let out_vars = query.projected_vars();
            let columns: Vec<usize> = out_vars
                .iter()
                .map(|v| vars.iter().position(|x| x == v).expect("validated"))
                .collect();
            let mut projected: Vec<Vec<Option<TermId>>> =
                rows.into_iter().map(|r| columns.iter().map(|&i| r[i]).collect()).collect();
            if *distinct {
                let mut seen = HashSet::new();
                projected.retain(|r| seen.insert(r.clone()));
            }
            let offset = query.offset.unwrap_or(0);
            let limit = query.limit.unwrap_or(usize::MAX);
            let rows = projected
                .into_iter()
                .skip(offset)
                .take(limit)
                .map(|r| r.into_iter().map(|id| id.map(|id| store.term(id).clone())).collect())
                .collect();
            QueryResult::Solutions { vars: out_vars, rows }
        }
    }
}
