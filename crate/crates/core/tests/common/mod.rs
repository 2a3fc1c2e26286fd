//! Fixtures, random generators and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::NaiveDate;
use ekg_core::corpus::{load_corpus, ChunkingConfig};
use ekg_core::ensemble::{EnsembleConfig, EnsembleRecord};
use ekg_core::extract::{CompletionBackend, MockBackend, RetryPolicy};
use ekg_core::kg::vocab::{EKG, OWL, RDF, RDFS, SKOS, XSD};
use ekg_core::kg::{parse_turtle, Graph, Iri, KgConfig, Literal, Term, Triple};
use ekg_core::pipeline::{self, DefaultSynonyms, KgArtifacts};
use ekg_core::sparql::{
    build_regex, date_year, equals_matches, Direction, FilterExpr, Operand, OrderKey, PatternTerm, Projection,
    Query, QueryForm, TriplePattern, TripleStore,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const BACKENDS: [&str; 3] = ["meta-llama-3-70b-instruct", "mistral-7b-openorca", "zephyr-7b-beta"];

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("fixture {rel}: {e}"))
}

pub struct MockRun {
    pub ensemble: Vec<EnsembleRecord>,
    pub artifacts: KgArtifacts,
}

/// Ingest, extract with the scripted backends, vote and build the graph.
pub fn run_mock_pipeline() -> MockRun {
    let corpus = load_corpus(fixture("mock/reports")).expect("mock corpus loads");
    assert!(corpus.skipped.is_empty(), "skipped: {:?}", corpus.skipped);
    let backends: Vec<MockBackend> = BACKENDS
        .iter()
        .map(|id| {
            let script = pipeline::load_mock_script(&fixture(&format!("mock/backends/{id}.json"))).unwrap();
            MockBackend::new(script)
        })
        .collect();
    let refs: Vec<&dyn CompletionBackend> = backends.iter().map(|b| b as &dyn CompletionBackend).collect();
    let records = pipeline::extract_corpus(
        &corpus.reports,
        &refs,
        ChunkingConfig::default(),
        RetryPolicy::immediate(),
        2,
        None,
    );
    let (ensemble, _) =
        pipeline::fuse(&records, &DefaultSynonyms::default(), &EnsembleConfig::default()).expect("votes");
    let events: Vec<_> = ensemble.iter().map(|r| r.event.clone()).collect();
    let artifacts = pipeline::build_artifacts(&events, &KgConfig::default()).expect("artifacts");
    MockRun { ensemble, artifacts }
}

pub fn fixture_graph() -> Graph {
    parse_turtle(&read_fixture("ekg_fixture.ttl"), "eKG").expect("fixture graph parses")
}

pub fn fixture_store() -> TripleStore {
    let mut store = TripleStore::new();
    store.load_graph("eKG", fixture_graph());
    store
}

pub const PUBLISHED_PREFIXES: &str = "\
PREFIX eKG: <http://data.jrc.ec.europa.eu/dataset/89056048-7f5d-4d7c-96ad-f99d1c0f6601/>
PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>
PREFIX dcterm: <http://purl.org/dc/terms/>
PREFIX dc: <http://purl.org/dc/elements/1.1/>
PREFIX owl: <http://www.w3.org/2002/07/owl#>
PREFIX xml: <http://www.w3.org/XML/1998/namespace>
PREFIX xsd: <http://www.w3.org/2001/XMLSchema#>
PREFIX obo: <http://purl.obolibrary.org/obo/>
PREFIX skos: <http://www.w3.org/2004/02/skos/core#>
";

pub const NIPAH_RECORD: &str = "SELECT *\nFROM <eKG>\nWHERE {eKG:don-record2740 ?p ?o}";
pub const COUNT_ALL: &str = "SELECT COUNT(*)\nFROM <eKG>\nWHERE {?s ?p ?o}";
pub const NIPAH_EQUALS: &str =
    "SELECT ?event\nFROM <eKG>\nWHERE {?event eKG:virus_extracted ?label .\n    FILTER (?label = \"Nipah Virus\")}";
pub const NIPAH_REGEX: &str = "SELECT ?event\nFROM <eKG>\nWHERE {?event eKG:virus_extracted ?label .\n    FILTER regex(str(?label), \"nipah\", \"i\")}";
pub const ITALY: &str =
    "SELECT ?event\nFROM <eKG>\nWHERE {?event eKG:country_extracted ?label .\n    FILTER (?label = \"Italy\")}";
pub const ITALY_2017: &str = "SELECT ?event ?outbreak ?cases\nFROM <eKG>\nWHERE {?event eKG:country_extracted ?label .\n?event eKG:date_extracted ?date .\n    FILTER (?label = \"Italy\") .\n    FILTER (year(?date) = 2017) .\n    ?event eKG:virus_extracted ?outbreak .\n    ?event eKG:cases_extracted ?cases . }";

pub fn with_prefixes(body: &str) -> String {
    format!("{PUBLISHED_PREFIXES}{body}")
}

pub fn record(seq: usize) -> Term {
    Term::iri(format!("{EKG}don-record{seq}"))
}

// ---------------------------------------------------------------------------
// Vote oracle

/// Plurality over `values` (priority order) by exhaustive counting. Among the
/// top counts a present value beats absence; then the earliest position wins.
pub fn brute_vote<K: Clone + PartialEq>(values: &[Option<K>]) -> Option<K> {
    let mut best: Option<(usize, bool, usize)> = None;
    let mut winner = None;
    for (i, v) in values.iter().enumerate() {
        let count = values.iter().filter(|w| *w == v).count();
        let key = (count, v.is_some(), usize::MAX - i);
        if best.map_or(true, |b| key > b) {
            best = Some(key);
            winner = v.clone();
        }
    }
    winner
}

/// Connected components of `related` over distinct terms, by repeated
/// relaxation of a reachability matrix.
pub fn brute_components(terms: &[String], related: impl Fn(&str, &str) -> bool) -> BTreeSet<BTreeSet<String>> {
    let unique: Vec<String> = terms.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n = unique.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if i != j && related(&unique[i], &unique[j]) {
                reach[i][j] = true;
                reach[j][i] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| reach[i][j]).map(|j| unique[j].clone()).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Random graphs

const LOCALS: &[&str] = &["a", "b", "don-record1", "x_y", "Thing", "p", "q2", "r-3"];
const AWKWARD_LOCALS: &[&str] = &["a.b", "x(1)", "caf\u{e9}", "50%25", "#frag", "q=1&r=2", ""];
const TEXTS: &[&str] = &[
    "plain",
    "Nipah Virus",
    "with \"quotes\"",
    "back\\slash",
    "line\nbreak",
    "tab\there",
    "caf\u{e9} \u{4e2d}\u{6587}",
    "a < b & c > d",
    "'single'",
    "",
    "15",
    "trailing space ",
    "\r\ncrlf",
    "\"\"\"",
];

fn pick<'a, T: ?Sized>(rng: &mut impl Rng, xs: &'a [&'a T]) -> &'a T {
    xs[rng.gen_range(0..xs.len())]
}

fn random_iri(rng: &mut impl Rng, namespaces: &[&str], awkward: bool) -> Iri {
    let ns = namespaces[rng.gen_range(0..namespaces.len())];
    let local = if awkward && rng.gen_bool(0.2) {
        pick(rng, AWKWARD_LOCALS)
    } else {
        pick(rng, LOCALS)
    };
    Iri::new(format!("{ns}{local}"))
}

fn random_literal(rng: &mut impl Rng, xml_safe: bool) -> Literal {
    let mut text = pick(rng, TEXTS).to_string();
    if !xml_safe && rng.gen_bool(0.05) {
        text.push('\u{1}');
    }
    match rng.gen_range(0..6) {
        0 => Literal::lang(text, pick(rng, &["en", "it", "en-GB"])),
        1 => Literal::date(NaiveDate::from_ymd_opt(rng.gen_range(2010..2020), rng.gen_range(1..13), rng.gen_range(1..29)).unwrap()),
        2 => Literal::typed(rng.gen_range(0..1000).to_string(), Iri::new(format!("{XSD}integer"))),
        3 => Literal::typed(text, Iri::new("http://example.org/dt")),
        _ => Literal::plain(text),
    }
}

/// Random graph with up to `max` triples. `xml_safe` keeps predicates
/// splittable into namespace and local name and literals free of characters
/// XML cannot carry.
pub fn random_graph(rng: &mut impl Rng, max: usize, xml_safe: bool) -> Graph {
    let subject_ns = [EKG, "http://example.org/", "urn:x-test:"];
    let predicate_ns = [EKG, RDFS, SKOS, "http://example.org/vocab#"];
    let mut g = Graph::new("g");
    let n = rng.gen_range(0..=max);
    for _ in 0..n {
        let subject = random_iri(rng, &subject_ns, !xml_safe);
        let predicate = if rng.gen_bool(0.1) {
            Iri::new(format!("{RDF}type"))
        } else {
            let ns = predicate_ns[rng.gen_range(0..predicate_ns.len())];
            Iri::new(format!("{ns}{}", pick(rng, &["p", "label", "virus_extracted", "q2", "has-part"])))
        };
        let object: Term = if rng.gen_bool(0.35) {
            if predicate.as_str().ends_with("#type") && rng.gen_bool(0.5) {
                Term::iri(format!("{OWL}Class"))
            } else {
                random_iri(rng, &subject_ns, !xml_safe).into()
            }
        } else {
            random_literal(rng, xml_safe).into()
        };
        g.insert(Triple::new(subject, predicate, object));
    }
    g
}

/// Converts a triple read by the independent RDF/XML parser.
pub fn from_oxrdf(t: oxrdf::Triple) -> Triple {
    let subject = match t.subject {
        oxrdf::Subject::NamedNode(n) => n.into_string(),
        other => panic!("unexpected subject {other}"),
    };
    let object: Term = match t.object {
        oxrdf::Term::NamedNode(n) => Term::iri(n.into_string()),
        oxrdf::Term::Literal(l) => {
            let (value, datatype, language) = l.destruct();
            match (language, datatype) {
                (Some(lang), _) => Literal::lang(value, lang).into(),
                (None, Some(dt)) if dt.as_str() != format!("{XSD}string") => {
                    Literal::typed(value, Iri::new(dt.into_string())).into()
                }
                _ => Literal::plain(value).into(),
            }
        }
        other => panic!("unexpected object {other}"),
    };
    Triple::new(subject, t.predicate.into_string(), object)
}

// ---------------------------------------------------------------------------
// SPARQL oracle

/// Small vocabulary so that random patterns join often.
pub fn sparql_vocab() -> (Vec<Term>, Vec<Term>, Vec<Term>) {
    let subjects: Vec<Term> = (0..8).map(|i| Term::iri(format!("http://e.org/s{i}"))).collect();
    let predicates: Vec<Term> = (0..4).map(|i| Term::iri(format!("http://e.org/p{i}"))).collect();
    let mut objects = subjects.clone();
    objects.extend([
        Term::literal("a"),
        Term::literal("B"),
        Term::literal("10"),
        Term::literal("10.0"),
        Term::literal("http://e.org/s1"),
        Literal::lang("a", "en").into(),
        Literal::typed("7", Iri::new(format!("{XSD}integer"))).into(),
        Literal::date(NaiveDate::from_ymd_opt(2017, 3, 1).unwrap()).into(),
        Literal::date(NaiveDate::from_ymd_opt(2018, 12, 31).unwrap()).into(),
    ]);
    (subjects, predicates, objects)
}

pub fn random_sparql_graph(rng: &mut impl Rng, max: usize) -> Graph {
    let (s, p, o) = sparql_vocab();
    let mut g = Graph::new("g");
    for _ in 0..rng.gen_range(0..=max) {
        let subject = s.choose(rng).unwrap().as_iri().unwrap().clone();
        let predicate = p.choose(rng).unwrap().as_iri().unwrap().clone();
        g.insert(Triple::new(subject, predicate, o.choose(rng).unwrap().clone()));
    }
    g
}

const VARS: [&str; 4] = ["a", "b", "c", "d"];

fn random_position(rng: &mut impl Rng, pool: &[Term], var_p: f64) -> PatternTerm {
    if rng.gen_bool(var_p) {
        PatternTerm::Var(VARS[rng.gen_range(0..VARS.len())].to_string())
    } else if rng.gen_bool(0.05) {
        PatternTerm::Term(Term::iri("http://e.org/absent"))
    } else {
        PatternTerm::Term(pool.choose(rng).unwrap().clone())
    }
}

/// A random query in the supported subset; every variable used outside the
/// patterns occurs in them.
pub fn random_query(rng: &mut impl Rng) -> Query {
    let (subjects, predicates, objects) = sparql_vocab();
    loop {
        let patterns: Vec<TriplePattern> = (0..rng.gen_range(1..=3))
            .map(|_| TriplePattern {
                subject: random_position(rng, &subjects, 0.7),
                predicate: random_position(rng, &predicates, 0.25),
                object: random_position(rng, &objects, 0.6),
            })
            .collect();
        let mut vars: Vec<String> = Vec::new();
        for v in patterns.iter().flat_map(TriplePattern::vars) {
            if !vars.iter().any(|x| x == v) {
                vars.push(v.to_string());
            }
        }
        let projection = match rng.gen_range(0..6) {
            0 => Projection::CountStar { alias: None },
            1 | 2 => Projection::Star,
            _ if vars.is_empty() => Projection::Star,
            _ => {
                let mut chosen: Vec<String> = vars.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
                if chosen.is_empty() {
                    chosen.push(vars[0].clone());
                }
                chosen.shuffle(rng);
                Projection::Vars(chosen)
            }
        };
        if vars.is_empty() && projection == Projection::Star {
            continue;
        }
        let mut filters = Vec::new();
        if !vars.is_empty() {
            for _ in 0..rng.gen_range(0..=2) {
                let var = vars.choose(rng).unwrap().clone();
                filters.push(match rng.gen_range(0..4) {
                    0 | 1 => FilterExpr::Equals {
                        left: if rng.gen_bool(0.3) { Operand::Str(var) } else { Operand::Var(var) },
                        right: objects.choose(rng).unwrap().clone(),
                    },
                    2 => FilterExpr::Regex {
                        var,
                        pattern: pick(rng, &["a", "^http", "1$", "b", "s[0-3]"]).to_string(),
                        flags: pick(rng, &["", "i"]).to_string(),
                    },
                    _ => FilterExpr::YearEquals { var, year: rng.gen_range(2016..2020) },
                });
            }
        }
        let projected: Vec<String> = match &projection {
            Projection::Vars(v) => v.clone(),
            Projection::Star => vars.clone(),
            Projection::CountStar { .. } => Vec::new(),
        };
        let mut order_by = Vec::new();
        let (mut limit, mut offset) = (None, None);
        if !projected.is_empty() {
            match rng.gen_range(0..4) {
                0 => {
                    order_by = projected
                        .iter()
                        .map(|v| OrderKey {
                            var: v.clone(),
                            direction: if rng.gen_bool(0.5) { Direction::Asc } else { Direction::Desc },
                        })
                        .collect();
                }
                1 => {
                    limit = Some(rng.gen_range(0..5));
                    offset = rng.gen_bool(0.5).then(|| rng.gen_range(0..4));
                }
                _ => {}
            }
        }
        let from = match rng.gen_range(0..6) {
            0 => vec!["eKG".to_string()],
            1 => vec!["other".to_string()],
            2 => vec!["eKG".to_string(), "other".to_string()],
            3 => vec!["absent".to_string()],
            _ => Vec::new(),
        };
        return Query {
            prefixes: Vec::new(),
            form: QueryForm::Select { distinct: rng.gen_bool(0.3), projection },
            from,
            patterns,
            filters,
            order_by,
            limit,
            offset,
        };
    }
}

type Binding = BTreeMap<String, Term>;

fn unify(pattern: &PatternTerm, term: &Term, binding: &mut Binding) -> bool {
    match pattern {
        PatternTerm::Term(t) => t == term,
        PatternTerm::Var(v) => match binding.get(v) {
            Some(bound) => bound == term,
            None => {
                binding.insert(v.clone(), term.clone());
                true
            }
        },
    }
}

fn filter_holds(f: &FilterExpr, binding: &Binding) -> bool {
    let bound = &binding[f.var()];
    match f {
        FilterExpr::Equals { left, right } => equals_matches(bound, matches!(left, Operand::Str(_)), right),
        FilterExpr::Regex { pattern, flags, .. } => {
            build_regex(pattern, flags).is_some_and(|re| re.is_match(bound.str_value()))
        }
        FilterExpr::YearEquals { year, .. } => date_year(bound) == Some(*year),
    }
}

/// Dataset triples for a query: the named graphs in FROM, or all graphs.
pub fn oracle_dataset(graphs: &BTreeMap<String, Graph>, from: &[String]) -> Vec<Triple> {
    let mut set: BTreeSet<Triple> = BTreeSet::new();
    for (name, g) in graphs {
        if from.is_empty() || from.contains(name) {
            set.extend(g.iter().cloned());
        }
    }
    set.into_iter().collect()
}

/// Solutions by nested loops over every triple for every pattern, filters
/// applied to complete solutions.
pub fn oracle_solutions(query: &Query, dataset: &[Triple]) -> Vec<Binding> {
    let mut solutions: Vec<Binding> = vec![Binding::new()];
    for pattern in &query.patterns {
        let mut next = Vec::new();
        for sol in &solutions {
            for t in dataset {
                let mut b = sol.clone();
                if unify(&pattern.subject, &Term::Iri(t.subject.clone()), &mut b)
                    && unify(&pattern.predicate, &Term::Iri(t.predicate.clone()), &mut b)
                    && unify(&pattern.object, &t.object, &mut b)
                {
                    next.push(b);
                }
            }
        }
        solutions = next;
    }
    solutions.retain(|b| query.filters.iter().all(|f| filter_holds(f, b)));
    solutions
}

/// Ordering used by ORDER BY: unbound, then IRIs, then literals; numeric
/// strings numerically, ties and the rest by string.
pub fn oracle_cmp(a: Option<&Term>, b: Option<&Term>) -> Ordering {
    let rank = |t: Option<&Term>| match t {
        None => 0,
        Some(Term::Iri(_)) => 1,
        Some(Term::Literal(_)) => 2,
    };
    match rank(a).cmp(&rank(b)) {
        Ordering::Equal => {}
        o => return o,
    }
    let (Some(a), Some(b)) = (a, b) else { return Ordering::Equal };
    let (x, y) = (a.str_value(), b.str_value());
    match (x.trim().parse::<f64>(), y.trim().parse::<f64>()) {
        (Ok(p), Ok(q)) => p.total_cmp(&q).then(x.cmp(y)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => x.cmp(y),
    }
}

pub fn row_cmp(query: &Query, vars: &[String], a: &[Option<Term>], b: &[Option<Term>]) -> Ordering {
    for key in &query.order_by {
        let i = vars.iter().position(|v| *v == key.var).unwrap();
        let o = oracle_cmp(a[i].as_ref(), b[i].as_ref());
        let o = if key.direction == Direction::Desc { o.reverse() } else { o };
        if o.is_ne() {
            return o;
        }
    }
    Ordering::Equal
}

/// Projected rows before ORDER BY, LIMIT and OFFSET.
pub fn oracle_rows(query: &Query, dataset: &[Triple]) -> (Vec<String>, Vec<Vec<Option<Term>>>) {
    let vars = query.projected_vars();
    let mut rows: Vec<Vec<Option<Term>>> = oracle_solutions(query, dataset)
        .into_iter()
        .map(|b| vars.iter().map(|v| b.get(v).cloned()).collect())
        .collect();
    if matches!(query.form, QueryForm::Select { distinct: true, .. }) {
        let mut seen = BTreeSet::new();
        rows.retain(|r| seen.insert(format!("{r:?}")));
    }
    (vars, rows)
}

pub fn sorted(mut rows: Vec<Vec<Option<Term>>>) -> Vec<Vec<Option<Term>>> {
    rows.sort_by_cached_key(|r| format!("{r:?}"));
    rows
}
