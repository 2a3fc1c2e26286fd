//! Turtle and N-Triples writing, and a Turtle reader for the same subset.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::{Graph, Iri, Literal, Term, Triple};
use super::vocab::{self, RDF_TYPE, XSD};
use crate::error::{Error, Result};

struct PrefixMap {
    entries: Vec<(String, String)>,
}

impl PrefixMap {
    fn new(entries: Vec<(&str, String)>) -> Self {
        let mut entries: Vec<(String, String)> =
            entries.into_iter().map(|(p, ns)| (p.to_string(), ns)).collect();
        // Longest namespace first so nested namespaces pick the tightest prefix.
        entries.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
        PrefixMap { entries }
    }

    fn compact(&self, iri: &str) -> Option<String> {
        self.entries.iter().find_map(|(prefix, ns)| {
            let local = iri.strip_prefix(ns.as_str())?;
            is_safe_local(local).then(|| format!("{prefix}:{local}"))
        })
    }
}

fn is_safe_local(local: &str) -> bool {
    let mut chars = local.chars();
    match chars.next() {
        None => true,
        Some(c) if c.is_ascii_alphanumeric() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        }
        Some(_) => false,
    }
}

fn write_iri(out: &mut String, iri: &str, prefixes: &PrefixMap) {
    match prefixes.compact(iri) {
        Some(pname) => out.push_str(&pname),
        None => write_full_iri(out, iri),
    }
}

fn write_full_iri(out: &mut String, iri: &str) {
    out.push('<');
    for c in iri.chars() {
        match c {
            '\0'..=' ' | '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\' => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('>');
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_literal(out: &mut String, lit: &Literal, prefixes: Option<&PrefixMap>) {
    write_string(out, lit.lexical());
    if let Some(lang) = lit.language() {
        out.push('@');
        out.push_str(lang);
    } else if let Some(dt) = lit.datatype() {
        out.push_str("^^");
        match prefixes {
            Some(p) => write_iri(out, dt.as_str(), p),
            None => write_full_iri(out, dt.as_str()),
        }
    }
}

fn write_term(out: &mut String, term: &Term, prefixes: &PrefixMap) {
    match term {
        Term::Iri(i) => write_iri(out, i.as_str(), prefixes),
        Term::Literal(l) => write_literal(out, l, Some(prefixes)),
    }
}

/// A term in N-Triples form.
pub fn write_term_absolute(out: &mut String, term: &Term) {
    match term {
        Term::Iri(i) => write_full_iri(out, i.as_str()),
        Term::Literal(l) => write_literal(out, l, None),
    }
}

/// Turtle with the outbreak vocabulary prefixes, grouped by subject.
pub fn serialize_turtle(graph: &Graph) -> String {
    serialize_turtle_with_base(graph, vocab::EKG)
}

pub fn serialize_turtle_with_base(graph: &Graph, base: &str) -> String {
    let declared = vocab::prefixes(base);
    let mut out = String::new();
    for (prefix, ns) in &declared {
        let _ = write!(out, "@prefix {prefix}: ");
        write_full_iri(&mut out, ns);
        out.push_str(" .\n");
    }
    let prefixes = PrefixMap::new(declared);

    let mut triples = graph.iter().peekable();
    while let Some(first) = triples.next() {
        let subject = &first.subject;
        let mut group: Vec<&Triple> = vec![first];
        while let Some(next) = triples.peek() {
            if &next.subject != subject {
                break;
            }
            group.push(triples.next().unwrap());
        }
        group.sort_by_key(|t| t.predicate.as_str() != RDF_TYPE);

        out.push('\n');
        write_iri(&mut out, subject.as_str(), &prefixes);
        for (i, t) in group.iter().enumerate() {
            out.push_str(if i == 0 { " " } else { " ;\n    " });
            if t.predicate.as_str() == RDF_TYPE {
                out.push('a');
            } else {
                write_iri(&mut out, t.predicate.as_str(), &prefixes);
            }
            out.push(' ');
            write_term(&mut out, &t.object, &prefixes);
        }
        out.push_str(" .\n");
    }
    out
}

/// One triple per line, absolute IRIs only.
pub fn serialize_ntriples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> String {
    let mut out = String::new();
    for t in triples {
        write_full_iri(&mut out, t.subject.as_str());
        out.push(' ');
        write_full_iri(&mut out, t.predicate.as_str());
        out.push(' ');
        write_term_absolute(&mut out, &t.object);
        out.push_str(" .\n");
    }
    out
}

/// Parses Turtle into a graph named `name`.
pub fn parse_turtle(text: &str, name: &str) -> Result<Graph> {
    let mut parser = Parser {
        src: text,
        pos: 0,
        prefixes: HashMap::new(),
        base: None,
    };
    let mut graph = Graph::new(name);
    parser.document(&mut graph)?;
    Ok(graph)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    prefixes: HashMap<String, String>,
    base: Option<String>,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        self.error_at(self.pos, message)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> Error {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Error::Turtle {
            line,
            column,
            message: message.into(),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        let rest = self.rest();
        let matches = rest.get(..word.len()).is_some_and(|w| w.eq_ignore_ascii_case(word));
        if matches
            && rest[word.len()..]
                .chars()
                .next()
                .is_none_or(|c| !(c.is_alphanumeric() || matches!(c, '_' | '-' | ':')))
        {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn document(&mut self, graph: &mut Graph) -> Result<()> {
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                return Ok(());
            }
            if self.rest().starts_with("@prefix") {
                self.pos += "@prefix".len();
                self.prefix_decl()?;
                self.expect('.')?;
            } else if self.rest().starts_with("@base") {
                self.pos += "@base".len();
                self.skip_ws();
                let iri = self.iriref()?;
                self.base = Some(iri);
                self.expect('.')?;
            } else if self.keyword("PREFIX") {
                self.prefix_decl()?;
            } else if self.keyword("BASE") {
                self.skip_ws();
                let iri = self.iriref()?;
                self.base = Some(iri);
            } else {
                self.triples(graph)?;
                self.expect('.')?;
            }
        }
    }

    fn prefix_decl(&mut self) -> Result<()> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !(c.is_alphanumeric() || c == '_' || c == '-' || c == '.') {
                return Err(self.error("invalid prefix name"));
            }
            self.bump();
        }
        let prefix = self.src[start..self.pos].to_string();
        self.expect(':')?;
        self.skip_ws();
        let iri = self.iriref()?;
        self.prefixes.insert(prefix, iri);
        Ok(())
    }

    fn triples(&mut self, graph: &mut Graph) -> Result<()> {
        let subject = match self.term()? {
            Term::Iri(i) => i,
            Term::Literal(_) => return Err(self.error("a literal cannot be a subject")),
        };
        loop {
            self.skip_ws();
            let predicate = if self.peek() == Some('a')
                && self.rest()[1..].chars().next().is_some_and(char::is_whitespace)
            {
                self.bump();
                Iri::new(RDF_TYPE)
            } else {
                match self.term()? {
                    Term::Iri(i) => i,
                    Term::Literal(_) => return Err(self.error("a literal cannot be a predicate")),
                }
            };
            loop {
                let object = self.term()?;
                graph.insert(Triple {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                self.skip_ws();
                if self.peek() == Some(',') {
                    self.bump();
                } else {
                    break;
                }
            }
            self.skip_ws();
            if self.peek() != Some(';') {
                return Ok(());
            }
            while self.peek() == Some(';') {
                self.bump();
                self.skip_ws();
            }
            if matches!(self.peek(), Some('.') | None) {
                return Ok(());
            }
        }
    }

    fn term(&mut self) -> Result<Term> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('<') => Ok(Term::Iri(Iri::new(self.iriref()?))),
            Some('"' | '\'') => self.literal(),
            Some('_') if self.rest().starts_with("_:") => {
                Err(self.error("blank nodes are not supported"))
            }
            Some('[' | '(') => Err(self.error("blank nodes and collections are not supported")),
            Some(c) if c.is_ascii_digit() || c == '+' || c == '-' || c == '.' => self.number(),
            Some(_) => {
                if self.keyword("true") {
                    return Ok(Literal::typed("true", format!("{XSD}boolean")).into());
                }
                if self.keyword("false") {
                    return Ok(Literal::typed("false", format!("{XSD}boolean")).into());
                }
                self.prefixed_name().map(Term::Iri).map_err(|e| match e {
                    Error::Turtle { .. } => e,
                    other => self.error_at(start, other.to_string()),
                })
            }
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn iriref(&mut self) -> Result<String> {
        if self.peek() != Some('<') {
            return Err(self.error("expected `<`"));
        }
        self.bump();
        let mut iri = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated IRI")),
                Some('>') => break,
                Some('\\') => iri.push(self.unicode_escape()?),
                Some(c) if c == ' ' || c == '\n' || c == '<' || c == '"' => {
                    return Err(self.error(format!("character {c:?} not allowed in IRI")))
                }
                Some(c) => iri.push(c),
            }
        }
        Ok(self.resolve(iri))
    }

    fn resolve(&self, iri: String) -> String {
        let has_scheme = iri
            .split_once(':')
            .is_some_and(|(scheme, _)| !scheme.is_empty() && scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)));
        match &self.base {
            Some(base) if !has_scheme => format!("{base}{iri}"),
            _ => iri,
        }
    }

    fn unicode_escape(&mut self) -> Result<char> {
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.error("invalid escape in IRI")),
        };
        self.hex_char(width)
    }

    fn hex_char(&mut self, width: usize) -> Result<char> {
        let digits = self.rest().get(..width).ok_or_else(|| self.error("truncated escape"))?;
        let code = u32::from_str_radix(digits, 16).map_err(|_| self.error("invalid hex escape"))?;
        let c = char::from_u32(code).ok_or_else(|| self.error("escape is not a scalar value"))?;
        self.pos += width;
        Ok(c)
    }

    fn prefixed_name(&mut self) -> Result<Iri> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !(c.is_alphanumeric() || c == '_' || c == '-' || c == '.') {
                return Err(self.error(format!("unexpected character {c:?}")));
            }
            self.bump();
        }
        if self.peek() != Some(':') {
            return Err(self.error_at(start, "expected a term"));
        }
        let prefix = self.src[start..self.pos].to_string();
        self.bump();
        let local_start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | ':' | '%') {
                self.bump();
            } else if c == '.'
                && self.rest()[1..]
                    .chars()
                    .next()
                    .is_some_and(|n| n.is_alphanumeric() || matches!(n, '_' | '-' | ':'))
            {
                self.bump();
            } else {
                break;
            }
        }
        let local = &self.src[local_start..self.pos];
        let ns = self
            .prefixes
            .get(&prefix)
            .ok_or_else(|| self.error_at(start, format!("undeclared prefix `{prefix}:`")))?;
        Ok(Iri::new(format!("{ns}{local}")))
    }

    fn literal(&mut self) -> Result<Term> {
        let quote = self.bump().expect("caller saw a quote");
        let long = self.rest().starts_with(&format!("{quote}{quote}"));
        if long {
            self.pos += 2;
        }
        let mut value = String::new();
        loop {
            let c = self.bump().ok_or_else(|| self.error("unterminated string"))?;
            if c == quote {
                if !long {
                    break;
                }
                let closing = format!("{quote}{quote}");
                if self.rest().starts_with(&closing) {
                    self.pos += 2;
                    // Up to two further quotes belong to the content.
                    break;
                }
                value.push(c);
                continue;
            }
            match c {
                '\\' => value.push(self.string_escape()?),
                '\n' | '\r' if !long => return Err(self.error("newline in short string")),
                c => value.push(c),
            }
        }
        if self.peek() == Some('@') {
            self.bump();
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '-') {
                self.bump();
            }
            if start == self.pos {
                return Err(self.error("empty language tag"));
            }
            return Ok(Literal::lang(value, &self.src[start..self.pos]).into());
        }
        if self.rest().starts_with("^^") {
            self.pos += 2;
            let dt = match self.peek() {
                Some('<') => Iri::new(self.iriref()?),
                _ => self.prefixed_name()?,
            };
            return Ok(Literal::typed(value, dt).into());
        }
        Ok(Literal::plain(value).into())
    }

    fn string_escape(&mut self) -> Result<char> {
        Ok(match self.bump() {
            Some('t') => '\t',
            Some('b') => '\u{8}',
            Some('n') => '\n',
            Some('r') => '\r',
            Some('f') => '\u{c}',
            Some('"') => '"',
            Some('\'') => '\'',
            Some('\\') => '\\',
            Some('u') => self.hex_char(4)?,
            Some('U') => self.hex_char(8)?,
            _ => return Err(self.error("invalid string escape")),
        })
    }

    fn number(&mut self) -> Result<Term> {
        let start = self.pos;
        if matches!(self.peek(), Some('+' | '-')) {
            self.bump();
        }
        let mut seen_dot = false;
        let mut seen_exp = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                self.bump();
            } else if c == '.' && !seen_dot && !seen_exp
                && self.rest()[1..].chars().next().is_some_and(|n| n.is_ascii_digit())
            {
                seen_dot = true;
                self.bump();
            } else if (c == 'e' || c == 'E') && !seen_exp {
                seen_exp = true;
                self.bump();
                if matches!(self.peek(), Some('+' | '-')) {
                    self.bump();
                }
            } else {
                break;
            }
        }
        let lexical = &self.src[start..self.pos];
        if !lexical.chars().any(|c| c.is_ascii_digit()) {
            return Err(self.error_at(start, "expected a term"));
        }
        let kind = if seen_exp {
            "double"
        } else if seen_dot {
            "decimal"
        } else {
            "integer"
        };
        Ok(Literal::typed(lexical, format!("{XSD}{kind}")).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::vocab::{EKG, RDFS_LABEL, XSD_DATE};

    #[test]
    fn single_triple_layout() {
        let mut g = Graph::new("g");
        g.insert(Triple::new(format!("{EKG}don-record1").as_str(), RDFS_LABEL, Term::literal("x")));
        let ttl = serialize_turtle(&g);
        assert!(ttl.contains("\neKG:don-record1 rdfs:label \"x\" .\n"), "{ttl}");
        assert_eq!(parse_turtle(&ttl, "g").unwrap(), g);
    }

    #[test]
    fn typed_date_survives() {
        let mut g = Graph::new("g");
        g.insert(Triple::new(
            format!("{EKG}don-record1").as_str(),
            format!("{EKG}date_extracted").as_str(),
            Literal::typed("2018-05-19", XSD_DATE),
        ));
        let ttl = serialize_turtle(&g);
        assert!(ttl.contains("\"2018-05-19\"^^xsd:date"));
        assert_eq!(parse_turtle(&ttl, "g").unwrap(), g);
    }

    #[test]
    fn reads_common_turtle_forms() {
        let ttl = r#"
            PREFIX ex: <http://example.org/>
            @base <http://example.org/base/> .
            # comment
            ex:a a ex:Thing ;
                ex:p "one", 'two'@EN, """three
lines""" ;
                ex:n 42, -1.5, 3e2, true ;
                <rel> ex:b ;
            .
        "#;
        let g = parse_turtle(ttl, "g").unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.contains(&Triple::new(
            "http://example.org/a",
            "http://example.org/base/rel",
            Term::iri("http://example.org/b")
        )));
        assert!(g.contains(&Triple::new(
            "http://example.org/a",
            "http://example.org/p",
            Literal::lang("two", "en")
        )));
        assert!(g.contains(&Triple::new(
            "http://example.org/a",
            "http://example.org/n",
            Literal::typed("42", format!("{XSD}integer"))
        )));
    }

    #[test]
    fn errors_carry_positions() {
        match parse_turtle("@prefix ex: <http://e/> .\nex:a ex:b _:x .", "g") {
            Err(Error::Turtle { line, column, .. }) => assert_eq!((line, column), (2, 11)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_turtle("nope:a <b> <c> .", "g"), Err(Error::Turtle { .. })));
        assert!(parse_turtle("<a> <b> \"open .", "g").is_err());
    }

    #[test]
    fn ntriples_are_readable_as_turtle() {
        let mut g = Graph::new("g");
        g.insert(Triple::new("http://e/s", "http://e/p", Literal::typed("1", format!("{XSD}integer"))));
        g.insert(Triple::new("http://e/s", "http://e/p", Literal::plain("tab\there \"q\"")));
        g.insert(Triple::new("http://e/s", "http://e/q", Term::iri("http://e/o")));
        let nt = serialize_ntriples(&g);
        assert_eq!(nt.lines().count(), 3);
        assert_eq!(parse_turtle(&nt, "g").unwrap(), g);
    }
}
