//! Query syntax tree and its canonical printer.

use std::fmt::Write as _;

use crate::kg::turtle::write_term_absolute;
use crate::kg::Term;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PatternTerm {
    Var(String),
    Term(Term),
}

impl PatternTerm {
    pub fn var(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Term(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.predicate, &self.object]
            .into_iter()
            .filter_map(PatternTerm::var)
    }
}

/// Left-hand side of an equality filter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(String),
    /// `str(?x)`
    Str(String),
}

impl Operand {
    pub fn var(&self) -> &str {
        match self {
            Operand::Var(v) | Operand::Str(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FilterExpr {
    Equals { left: Operand, right: Term },
    /// `regex(str(?var), pattern, flags)`
    Regex { var: String, pattern: String, flags: String },
    YearEquals { var: String, year: i64 },
}

impl FilterExpr {
    pub fn var(&self) -> &str {
        match self {
            FilterExpr::Equals { left, .. } => left.var(),
            FilterExpr::Regex { var, .. } | FilterExpr::YearEquals { var, .. } => var,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Projection {
    Vars(Vec<String>),
    Star,
    /// `COUNT(*)`, optionally `AS ?alias`.
    CountStar { alias: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum QueryForm {
    Select { distinct: bool, projection: Projection },
    Describe(Vec<PatternTerm>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OrderKey {
    pub var: String,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub prefixes: Vec<(String, String)>,
    pub form: QueryForm,
    /// Graph names after `FROM`; empty means the union of all graphs.
    pub from: Vec<String>,
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<FilterExpr>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

impl Query {
    /// Variables in order of first appearance in the patterns.
    pub fn pattern_vars(&self) -> Vec<String> {
        let mut vars: Vec<String> = Vec::new();
        for v in self.patterns.iter().flat_map(TriplePattern::vars) {
            if !vars.iter().any(|x| x == v) {
                vars.push(v.to_string());
            }
        }
        vars
    }

    /// Names of the result columns of a SELECT.
    pub fn projected_vars(&self) -> Vec<String> {
        match &self.form {
            QueryForm::Select { projection: Projection::Vars(v), .. } => v.clone(),
            QueryForm::Select { projection: Projection::Star, .. } => self.pattern_vars(),
            QueryForm::Select { projection: Projection::CountStar { alias }, .. } => {
                vec![alias.clone().unwrap_or_else(|| "count".to_string())]
            }
            QueryForm::Describe(_) => vec!["s".into(), "p".into(), "o".into()],
        }
    }
}

fn write_pattern_term(out: &mut String, t: &PatternTerm) {
    match t {
        PatternTerm::Var(v) => {
            let _ = write!(out, "?{v}");
        }
        PatternTerm::Term(t) => write_term_absolute(out, t),
    }
}

fn write_string(out: &mut String, s: &str) {
    write_term_absolute(out, &Term::literal(s));
}

/// Canonical text of a query. Terms are written as absolute IRIs, so
/// reparsing the output yields the same tree.
pub fn print_query(q: &Query) -> String {
    let mut out = String::new();
    for (prefix, iri) in &q.prefixes {
        let _ = write!(out, "PREFIX {prefix}: ");
        write_term_absolute(&mut out, &Term::iri(iri.clone()));
        out.push('\n');
    }
    match &q.form {
        QueryForm::Select { distinct, projection } => {
            out.push_str("SELECT ");
            if *distinct {
                out.push_str("DISTINCT ");
            }
            match projection {
                Projection::Star => out.push('*'),
                Projection::Vars(vars) => {
                    let names: Vec<String> = vars.iter().map(|v| format!("?{v}")).collect();
                    out.push_str(&names.join(" "));
                }
                Projection::CountStar { alias: None } => out.push_str("COUNT(*)"),
                Projection::CountStar { alias: Some(a) } => {
                    let _ = write!(out, "(COUNT(*) AS ?{a})");
                }
            }
        }
        QueryForm::Describe(targets) => {
            out.push_str("DESCRIBE");
            if targets.is_empty() {
                out.push_str(" *");
            }
            for t in targets {
                out.push(' ');
                write_pattern_term(&mut out, t);
            }
        }
    }
    out.push('\n');
    for g in &q.from {
        out.push_str("FROM ");
        write_term_absolute(&mut out, &Term::iri(g.clone()));
        out.push('\n');
    }
    out.push_str("WHERE {\n");
    for p in &q.patterns {
        out.push_str("  ");
        write_pattern_term(&mut out, &p.subject);
        out.push(' ');
        write_pattern_term(&mut out, &p.predicate);
        out.push(' ');
        write_pattern_term(&mut out, &p.object);
        out.push_str(" .\n");
    }
    for f in &q.filters {
        out.push_str("  FILTER ");
        match f {
            FilterExpr::Equals { left, right } => {
                out.push('(');
                match left {
                    Operand::Var(v) => {
                        let _ = write!(out, "?{v}");
                    }
                    Operand::Str(v) => {
                        let _ = write!(out, "str(?{v})");
                    }
                }
                out.push_str(" = ");
                write_term_absolute(&mut out, right);
                out.push(')');
            }
            FilterExpr::Regex { var, pattern, flags } => {
                let _ = write!(out, "regex(str(?{var}), ");
                write_string(&mut out, pattern);
                if !flags.is_empty() {
                    out.push_str(", ");
                    write_string(&mut out, flags);
                }
                out.push(')');
            }
            FilterExpr::YearEquals { var, year } => {
                let _ = write!(out, "(year(?{var}) = {year})");
            }
        }
        out.push('\n');
    }
    out.push('}');
    if !q.order_by.is_empty() {
        out.push_str("\nORDER BY");
        for k in &q.order_by {
            match k.direction {
                Direction::Asc => {
                    let _ = write!(out, " ?{}", k.var);
                }
                Direction::Desc => {
                    let _ = write!(out, " DESC(?{})", k.var);
                }
            }
        }
    }
    if let Some(n) = q.limit {
        let _ = write!(out, "\nLIMIT {n}");
    }
    if let Some(n) = q.offset {
        let _ = write!(out, "\nOFFSET {n}");
    }
    out.push('\n');
    out
}
