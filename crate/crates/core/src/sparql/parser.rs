//! Tokenizer and recursive-descent parser for the query subset.

use std::collections::HashSet;

use super::ast::{
    Direction, FilterExpr, Operand, OrderKey, PatternTerm, Projection, Query, QueryForm, TriplePattern,
};
use crate::error::{Error, Result};
use crate::kg::vocab::{RDF_TYPE, XSD};
use crate::kg::{Literal, Term};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Iri(String),
    PName(String, String),
    Var(String),
    Str(String),
    LangTag(String),
    Number(String),
    Word(String),
    Punct(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Iri(i) => format!("<{i}>"),
            Tok::PName(p, l) => format!("{p}:{l}"),
            Tok::Var(v) => format!("?{v}"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::LangTag(t) => format!("@{t}"),
            Tok::Number(n) | Tok::Word(n) => n.clone(),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

struct Spanned {
    tok: Tok,
    at: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::QuerySyntax {
        offset,
        message: message.into(),
    }
}

fn is_pn_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn tokenize(src: &str) -> Result<Vec<Spanned>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().expect("in bounds");
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '#' {
            i = src[i..].find('\n').map_or(src.len(), |n| i + n);
            continue;
        }
        let tok = match c {
            '<' => {
                let end = src[i + 1..]
                    .find(|ch: char| ch == '>' || ch.is_whitespace() || ch == '"' || ch == '<')
                    .map(|n| i + 1 + n)
                    .filter(|&e| bytes[e] == b'>')
                    .ok_or_else(|| syntax(start, "unterminated IRI, expected `>`"))?;
                i = end + 1;
                Tok::Iri(unescape_iri(&src[start + 1..end]).ok_or_else(|| syntax(start, "invalid escape in IRI"))?)
            }
            '?' | '$' => {
                let len = src[i + 1..].find(|ch: char| !is_pn_char(ch) || ch == '-').unwrap_or(src.len() - i - 1);
                if len == 0 {
                    return Err(syntax(start, "expected a variable name after `?`"));
                }
                i += 1 + len;
                Tok::Var(src[start + 1..i].to_string())
            }
            '"' | '\'' => {
                let (value, end) = read_string(src, i)?;
                i = end;
                Tok::Str(value)
            }
            '@' => {
                let len = src[i + 1..]
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '-'))
                    .unwrap_or(src.len() - i - 1);
                if len == 0 {
                    return Err(syntax(start, "expected a language tag after `@`"));
                }
                i += 1 + len;
                Tok::LangTag(src[start + 1..i].to_ascii_lowercase())
            }
            '^' if src[i..].starts_with("^^") => {
                i += 2;
                Tok::Punct("^^")
            }
            '{' | '}' | '(' | ')' | '.' | ',' | ';' | '*' | '=' => {
                i += 1;
                Tok::Punct(match c {
                    '{' => "{",
                    '}' => "}",
                    '(' => "(",
                    ')' => ")",
                    '.' => ".",
                    ',' => ",",
                    ';' => ";",
                    '*' => "*",
                    _ => "=",
                })
            }
            c if c.is_ascii_digit() || ((c == '-' || c == '+') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) => {
                i += 1;
                while i < src.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i + 1 < src.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < src.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                Tok::Number(src[start..i].to_string())
            }
            c if is_pn_char(c) || c == ':' => {
                let mut end = i;
                for (k, ch) in src[i..].char_indices() {
                    if is_pn_char(ch) || ch == ':' || (ch == '.' && src[i + k + 1..].starts_with(is_pn_char)) {
                        end = i + k + ch.len_utf8();
                    } else {
                        break;
                    }
                }
                i = end;
                let word = &src[start..end];
                match word.split_once(':') {
                    Some((prefix, local)) => Tok::PName(prefix.to_string(), local.to_string()),
                    None => Tok::Word(word.to_string()),
                }
            }
            other => return Err(syntax(start, format!("unexpected character {other:?}"))),
        };
        out.push(Spanned { tok, at: start });
    }
    Ok(out)
}

fn unescape_iri(raw: &str) -> Option<String> {
    if !raw.contains('\\') {
        return Some(raw.to_string());
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(k) = rest.find('\\') {
        out.push_str(&rest[..k]);
        let width = match rest.as_bytes().get(k + 1) {
            Some(b'u') => 4,
            Some(b'U') => 8,
            _ => return None,
        };
        let digits = rest.get(k + 2..k + 2 + width)?;
        out.push(char::from_u32(u32::from_str_radix(digits, 16).ok()?)?);
        rest = &rest[k + 2 + width..];
    }
    out.push_str(rest);
    Some(out)
}

fn read_string(src: &str, start: usize) -> Result<(String, usize)> {
    let quote = src[start..].chars().next().expect("caller saw a quote");
    let mut value = String::new();
    let mut chars = src[start + 1..].char_indices();
    while let Some((k, c)) = chars.next() {
        let at = start + 1 + k;
        match c {
            c if c == quote => return Ok((value, at + 1)),
            '\\' => {
                let (_, e) = chars.next().ok_or_else(|| syntax(at, "unterminated escape"))?;
                value.push(match e {
                    't' => '\t',
                    'n' => '\n',
                    'r' => '\r',
                    'b' => '\u{8}',
                    'f' => '\u{c}',
                    '"' => '"',
                    '\'' => '\'',
                    '\\' => '\\',
                    'u' | 'U' => {
                        let width = if e == 'u' { 4 } else { 8 };
                        let digits: String = (0..width).filter_map(|_| chars.next().map(|(_, d)| d)).collect();
                        u32::from_str_radix(&digits, 16)
                            .ok()
                            .filter(|_| digits.len() == width)
                            .and_then(char::from_u32)
                            .ok_or_else(|| syntax(at, "invalid unicode escape"))?
                    }
                    other => return Err(syntax(at, format!("invalid escape `\\{other}`"))),
                });
            }
            '\n' | '\r' => return Err(syntax(at, "newline in string literal")),
            c => value.push(c),
        }
    }
    Err(syntax(start, "unterminated string literal"))
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: usize,
    prefixes: Vec<(String, String)>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |s| s.at)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expected(&self, what: &str) -> Error {
        let found = self.peek().map_or("end of query".to_string(), Tok::describe);
        syntax(self.offset(), format!("expected {what}, found {found}"))
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(word))
    }

    fn eat_word(&mut self, word: &str) -> bool {
        let hit = self.is_word(word);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_word(&mut self, word: &str) -> Result<()> {
        if self.eat_word(word) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{word}`")))
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = matches!(self.peek(), Some(Tok::Punct(q)) if *q == p);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_punct(&mut self, p: &str) -> Result<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{p}`")))
        }
    }

    fn var(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.expected("a variable")),
        }
    }

    fn resolve(&self, prefix: &str, local: &str) -> Result<String> {
        self.prefixes
            .iter()
            .rev()
            .find(|(p, _)| p == prefix)
            .map(|(_, ns)| format!("{ns}{local}"))
            .ok_or_else(|| Error::UnknownPrefix(prefix.to_string()))
    }

    fn iri(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Iri(i)) => Ok(i),
            Some(Tok::PName(p, l)) => self.resolve(&p, &l),
            _ => {
                self.pos -= 1;
                Err(self.expected("an IRI"))
            }
        }
    }

    fn constant(&mut self) -> Result<Term> {
        match self.peek().cloned() {
            Some(Tok::Iri(_) | Tok::PName(..)) => Ok(Term::iri(self.iri()?)),
            Some(Tok::Str(s)) => {
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Tok::LangTag(tag)) => {
                        self.pos += 1;
                        Ok(Literal::lang(s, tag).into())
                    }
                    Some(Tok::Punct("^^")) => {
                        self.pos += 1;
                        Ok(Literal::typed(s, self.iri()?).into())
                    }
                    _ => Ok(Term::literal(s)),
                }
            }
            Some(Tok::Number(n)) => {
                self.pos += 1;
                let kind = if n.contains('.') { "decimal" } else { "integer" };
                Ok(Literal::typed(n, format!("{XSD}{kind}")).into())
            }
            Some(Tok::Word(w)) if w == "true" || w == "false" => {
                self.pos += 1;
                Ok(Literal::typed(w, format!("{XSD}boolean")).into())
            }
            _ => Err(self.expected("an IRI or literal")),
        }
    }

    fn pattern_term(&mut self, position: &str) -> Result<PatternTerm> {
        match self.peek() {
            Some(Tok::Var(_)) => Ok(PatternTerm::Var(self.var()?)),
            Some(Tok::Word(w)) if w == "a" && position == "predicate" => {
                self.pos += 1;
                Ok(PatternTerm::Term(Term::iri(RDF_TYPE)))
            }
            Some(Tok::Iri(_) | Tok::PName(..)) => Ok(PatternTerm::Term(self.constant()?)),
            Some(Tok::Str(_) | Tok::Number(_)) if position == "object" => Ok(PatternTerm::Term(self.constant()?)),
            Some(Tok::Word(w)) if position == "object" && (w == "true" || w == "false") => {
                Ok(PatternTerm::Term(self.constant()?))
            }
            _ => {
                let article = if position.starts_with('o') { "an" } else { "a" };
                Err(self.expected(&format!("{article} {position}")))
            }
        }
    }

    fn query(&mut self) -> Result<Query> {
        loop {
            if self.eat_word("PREFIX") {
                let (prefix, local) = match self.next() {
                    Some(Tok::PName(p, l)) => (p, l),
                    _ => {
                        self.pos -= 1;
                        return Err(self.expected("a prefix name ending in `:`"));
                    }
                };
                if !local.is_empty() {
                    return Err(syntax(self.toks[self.pos - 1].at, "prefix declaration must end with `:`"));
                }
                let iri = match self.next() {
                    Some(Tok::Iri(i)) => i,
                    _ => {
                        self.pos -= 1;
                        return Err(self.expected("an IRI in angle brackets"));
                    }
                };
                self.prefixes.push((prefix, iri));
            } else {
                break;
            }
        }

        let form = if self.eat_word("SELECT") {
            let distinct = self.eat_word("DISTINCT");
            QueryForm::Select {
                distinct,
                projection: self.projection()?,
            }
        } else if self.eat_word("DESCRIBE") {
            let mut targets = Vec::new();
            if self.eat_punct("*") {
                // Every bound term of the pattern.
            } else {
                while matches!(self.peek(), Some(Tok::Var(_) | Tok::Iri(_) | Tok::PName(..))) {
                    targets.push(self.pattern_term("subject")?);
                }
                if targets.is_empty() {
                    return Err(self.expected("a variable, IRI or `*` after DESCRIBE"));
                }
            }
            QueryForm::Describe(targets)
        } else if self.is_word("ASK") || self.is_word("CONSTRUCT") {
            let at = self.offset();
            let word = self.next().map(|t| t.describe()).unwrap_or_default();
            return Err(syntax(at, format!("{} queries are not supported", word.to_ascii_uppercase())));
        } else {
            return Err(self.expected("SELECT or DESCRIBE"));
        };

        let mut from = Vec::new();
        while self.eat_word("FROM") {
            if self.is_word("NAMED") {
                return Err(syntax(self.offset(), "FROM NAMED is not supported"));
            }
            from.push(self.iri()?);
        }

        let mut patterns = Vec::new();
        let mut filters = Vec::new();
        let has_where = self.eat_word("WHERE");
        let describe_without_where = matches!(form, QueryForm::Describe(_)) && !has_where && self.peek() != Some(&Tok::Punct("{"));
        if !describe_without_where {
            self.group(&mut patterns, &mut filters)?;
        }

        let mut order_by = Vec::new();
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            loop {
                let direction = if self.eat_word("ASC") {
                    Direction::Asc
                } else if self.eat_word("DESC") {
                    Direction::Desc
                } else if matches!(self.peek(), Some(Tok::Var(_))) {
                    order_by.push(OrderKey {
                        var: self.var()?,
                        direction: Direction::Asc,
                    });
                    continue;
                } else {
                    break;
                };
                self.expect_punct("(")?;
                let var = self.var()?;
                self.expect_punct(")")?;
                order_by.push(OrderKey { var, direction });
            }
            if order_by.is_empty() {
                return Err(self.expected("an ordering variable"));
            }
        }
        let mut limit = None;
        let mut offset = None;
        loop {
            if self.eat_word("LIMIT") {
                limit = Some(self.count("LIMIT")?);
            } else if self.eat_word("OFFSET") {
                offset = Some(self.count("OFFSET")?);
            } else {
                break;
            }
        }
        if self.peek().is_some() {
            return Err(self.expected("end of query"));
        }

        let query = Query {
            prefixes: self.prefixes.clone(),
            form,
            from,
            patterns,
            filters,
            order_by,
            limit,
            offset,
        };
        validate(&query)?;
        Ok(query)
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        match self.peek() {
            Some(Tok::Number(n)) if n.chars().all(|c| c.is_ascii_digit()) => {
                let at = self.offset();
                let n = n.parse().map_err(|_| syntax(at, format!("{what} value is too large")))?;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.expected(&format!("a non-negative integer after {what}"))),
        }
    }

    fn projection(&mut self) -> Result<Projection> {
        if self.eat_punct("*") {
            return Ok(Projection::Star);
        }
        if self.is_word("COUNT") {
            self.pos += 1;
            self.count_star()?;
            return Ok(Projection::CountStar { alias: None });
        }
        if self.eat_punct("(") {
            self.expect_word("COUNT")?;
            self.count_star()?;
            self.expect_word("AS")?;
            let alias = self.var()?;
            self.expect_punct(")")?;
            return Ok(Projection::CountStar { alias: Some(alias) });
        }
        let mut vars = Vec::new();
        while matches!(self.peek(), Some(Tok::Var(_))) {
            vars.push(self.var()?);
        }
        if vars.is_empty() {
            return Err(self.expected("`*`, COUNT(*) or a variable list"));
        }
        Ok(Projection::Vars(vars))
    }

    fn count_star(&mut self) -> Result<()> {
        self.expect_punct("(")?;
        self.expect_punct("*")?;
        self.expect_punct(")")
    }

    fn group(&mut self, patterns: &mut Vec<TriplePattern>, filters: &mut Vec<FilterExpr>) -> Result<()> {
        self.expect_punct("{")?;
        loop {
            if self.eat_punct("}") {
                return Ok(());
            }
            if self.eat_word("FILTER") {
                filters.push(self.filter()?);
                self.eat_punct(".");
                continue;
            }
            if self.is_word("OPTIONAL") || self.is_word("UNION") || self.is_word("GRAPH") || self.is_word("BIND") {
                let word = self.peek().map(Tok::describe).unwrap_or_default();
                return Err(syntax(self.offset(), format!("{} is not supported", word.to_ascii_uppercase())));
            }
            let subject = self.pattern_term("subject")?;
            loop {
                let predicate = self.pattern_term("predicate")?;
                loop {
                    let object = self.pattern_term("object")?;
                    patterns.push(TriplePattern {
                        subject: subject.clone(),
                        predicate: predicate.clone(),
                        object,
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                if !self.eat_punct(";") {
                    break;
                }
                if matches!(self.peek(), Some(Tok::Punct("." | "}"))) {
                    break;
                }
            }
            if !self.eat_punct(".") && !matches!(self.peek(), Some(Tok::Punct("}"))) && !self.is_word("FILTER") {
                return Err(self.expected("`.` or `}`"));
            }
        }
    }

    fn filter(&mut self) -> Result<FilterExpr> {
        if self.is_word("regex") {
            return self.regex();
        }
        self.expect_punct("(")?;
        let expr = self.filter_body()?;
        self.expect_punct(")")?;
        Ok(expr)
    }

    fn filter_body(&mut self) -> Result<FilterExpr> {
        if self.eat_punct("(") {
            let expr = self.filter_body()?;
            self.expect_punct(")")?;
            return Ok(expr);
        }
        if self.is_word("regex") {
            return self.regex();
        }
        if self.eat_word("year") {
            self.expect_punct("(")?;
            let var = self.var()?;
            self.expect_punct(")")?;
            self.expect_punct("=")?;
            let at = self.offset();
            let year = match self.next() {
                Some(Tok::Number(n)) => n.parse().map_err(|_| syntax(at, "year must be an integer"))?,
                _ => return Err(syntax(at, "expected an integer year")),
            };
            return Ok(FilterExpr::YearEquals { var, year });
        }
        let left = self.operand();
        match left {
            Some(left) => {
                self.expect_punct("=")?;
                let right = self.constant()?;
                Ok(FilterExpr::Equals { left, right })
            }
            None => {
                let right = self.constant().map_err(|_| self.expected("a variable, str(), year() or regex()"))?;
                self.expect_punct("=")?;
                let left = self.operand().ok_or_else(|| self.expected("a variable or str(?var)"))?;
                Ok(FilterExpr::Equals { left, right })
            }
        }
    }

    fn operand(&mut self) -> Option<Operand> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.pos += 1;
                Some(Operand::Var(v))
            }
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("str") => {
                let save = self.pos;
                self.pos += 1;
                let parsed = (|| {
                    self.expect_punct("(")?;
                    let v = self.var()?;
                    self.expect_punct(")")?;
                    Ok::<_, Error>(v)
                })();
                match parsed {
                    Ok(v) => Some(Operand::Str(v)),
                    Err(_) => {
                        self.pos = save;
                        None
                    }
                }
            }
            _ => None,
        }
    }

    fn regex(&mut self) -> Result<FilterExpr> {
        self.expect_word("regex")?;
        self.expect_punct("(")?;
        let var = match self.operand() {
            Some(op) => op.var().to_string(),
            None => return Err(self.expected("str(?var) or a variable")),
        };
        self.expect_punct(",")?;
        let pattern_at = self.offset();
        let pattern = self.string("a pattern string")?;
        let flags = if self.eat_punct(",") {
            let at = self.offset();
            let flags = self.string("a flags string")?;
            if let Some(bad) = flags.chars().find(|c| !"ismx".contains(*c)) {
                return Err(syntax(at, format!("unsupported regex flag `{bad}`")));
            }
            flags
        } else {
            String::new()
        };
        self.expect_punct(")")?;
        regex::Regex::new(&pattern).map_err(|e| syntax(pattern_at, format!("invalid regular expression: {e}")))?;
        Ok(FilterExpr::Regex { var, pattern, flags })
    }

    fn string(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.expected(what)),
        }
    }
}

fn validate(q: &Query) -> Result<()> {
    let bound: HashSet<&str> = q.patterns.iter().flat_map(TriplePattern::vars).collect();
    let check = |v: &str, role: &str| {
        if bound.contains(v) {
            Ok(())
        } else {
            Err(syntax(0, format!("{role} variable ?{v} does not occur in any triple pattern")))
        }
    };
    match &q.form {
        QueryForm::Select { projection: Projection::Vars(vars), .. } => {
            for v in vars {
                check(v, "projected")?;
            }
        }
        QueryForm::Select { projection: Projection::CountStar { alias: Some(a) }, .. } if bound.contains(a.as_str()) => {
            return Err(syntax(0, format!("COUNT alias ?{a} is already used in the pattern")));
        }
        QueryForm::Describe(targets) => {
            for v in targets.iter().filter_map(PatternTerm::var) {
                check(v, "described")?;
            }
        }
        QueryForm::Select { .. } => {}
    }
    for f in &q.filters {
        check(f.var(), "filter")?;
    }
    for k in &q.order_by {
        check(&k.var, "ordering")?;
    }
    Ok(())
}

/// Parses a query. Keywords are case-insensitive.
pub fn parse_query(text: &str) -> Result<Query> {
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end: text.len(),
        prefixes: Vec::new(),
    };
    parser.query()
}
