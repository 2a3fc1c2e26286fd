//! Named-graph triple store with SPO, POS and OSP indexes over interned terms.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::kg::{Graph, Iri, Term, Triple};

pub type TermId = u32;

type Key = (TermId, TermId, TermId);

#[derive(Clone, Debug, Default)]
struct Interner {
    terms: Vec<Term>,
    ids: HashMap<Term, TermId>,
}

impl Interner {
    fn intern(&mut self, term: &Term) -> TermId {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = TermId::try_from(self.terms.len()).expect("fewer than 2^32 distinct terms");
        self.terms.push(term.clone());
        self.ids.insert(term.clone(), id);
        id
    }
}

/// The three orderings of one triple set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Index {
    spo: BTreeSet<Key>,
    pos: BTreeSet<Key>,
    osp: BTreeSet<Key>,
}

impl Index {
    fn insert(&mut self, (s, p, o): Key) {
        self.spo.insert((s, p, o));
        self.pos.insert((p, o, s));
        self.osp.insert((o, s, p));
    }

    fn merge(&mut self, other: &Index) {
        for &k in &other.spo {
            self.insert(k);
        }
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    /// Triples matching the bound positions, as `(s, p, o)`, using the
    /// ordering whose prefix covers the bound positions.
    pub fn scan(
        &self,
        s: Option<TermId>,
        p: Option<TermId>,
        o: Option<TermId>,
    ) -> Box<dyn Iterator<Item = Key> + '_> {
        const MAX: TermId = TermId::MAX;
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => Box::new(self.spo.get(&(s, p, o)).copied().into_iter()),
            (Some(s), Some(p), None) => Box::new(self.spo.range((s, p, 0)..=(s, p, MAX)).copied()),
            (Some(s), None, None) => Box::new(self.spo.range((s, 0, 0)..=(s, MAX, MAX)).copied()),
            (Some(s), None, Some(o)) => {
                Box::new(self.osp.range((o, s, 0)..=(o, s, MAX)).map(|&(o, s, p)| (s, p, o)))
            }
            (None, Some(p), Some(o)) => {
                Box::new(self.pos.range((p, o, 0)..=(p, o, MAX)).map(|&(p, o, s)| (s, p, o)))
            }
            (None, Some(p), None) => {
                Box::new(self.pos.range((p, 0, 0)..=(p, MAX, MAX)).map(|&(p, o, s)| (s, p, o)))
            }
            (None, None, Some(o)) => {
                Box::new(self.osp.range((o, 0, 0)..=(o, MAX, MAX)).map(|&(o, s, p)| (s, p, o)))
            }
            (None, None, None) => Box::new(self.spo.iter().copied()),
        }
    }

    fn consistent(&self) -> bool {
        self.spo.len() == self.pos.len()
            && self.spo.len() == self.osp.len()
            && self.spo.iter().all(|&(s, p, o)| self.pos.contains(&(p, o, s)) && self.osp.contains(&(o, s, p)))
    }
}

/// In-memory named graphs. A store is an immutable snapshot once shared;
/// loading takes `&mut self`.
#[derive(Clone, Debug, Default)]
pub struct TripleStore {
    interner: Interner,
    graphs: BTreeMap<String, (Graph, Index)>,
    union: Index,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the graph called `name`.
    pub fn load_graph(&mut self, name: impl Into<String>, mut graph: Graph) {
        let name = name.into();
        graph.name = name.clone();
        let mut index = Index::default();
        for t in &graph {
            let key = self.intern_triple(t);
            index.insert(key);
        }
        self.graphs.insert(name, (graph, index));
        self.rebuild_union();
    }

    pub fn remove_graph(&mut self, name: &str) -> Option<Graph> {
        let removed = self.graphs.remove(name).map(|(g, _)| g);
        self.rebuild_union();
        removed
    }

    fn intern_triple(&mut self, t: &Triple) -> Key {
        (
            self.interner.intern(&Term::Iri(t.subject.clone())),
            self.interner.intern(&Term::Iri(t.predicate.clone())),
            self.interner.intern(&t.object),
        )
    }

    fn rebuild_union(&mut self) {
        let mut union = Index::default();
        for (_, index) in self.graphs.values() {
            union.merge(index);
        }
        self.union = union;
    }

    /// Re-interns every term and rebuilds all indexes from the stored graphs.
    pub fn reindex(&mut self) {
        let graphs = std::mem::take(&mut self.graphs);
        self.interner = Interner::default();
        for (name, (graph, _)) in graphs {
            self.load_graph(name, graph);
        }
        if self.graphs.is_empty() {
            self.union = Index::default();
        }
    }

    pub fn graph(&self, name: &str) -> Option<&Graph> {
        self.graphs.get(name).map(|(g, _)| g)
    }

    pub fn graph_names(&self) -> impl Iterator<Item = &str> {
        self.graphs.keys().map(String::as_str)
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.graphs.values().map(|(g, _)| g)
    }

    /// Distinct triples across all graphs.
    pub fn len(&self) -> usize {
        self.union.len()
    }

    pub fn is_empty(&self) -> bool {
        self.union.is_empty()
    }

    pub fn id(&self, term: &Term) -> Option<TermId> {
        self.interner.ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.interner.terms[id as usize]
    }

    /// Index over the named graphs, or over all graphs when `from` is empty.
    /// Names that are not loaded contribute nothing.
    pub fn dataset(&self, from: &[String]) -> Cow<'_, Index> {
        match from {
            [] => Cow::Borrowed(&self.union),
            [one] => match self.graphs.get(one) {
                Some((_, index)) => Cow::Borrowed(index),
                None => Cow::Owned(Index::default()),
            },
            many => {
                let mut merged = Index::default();
                for name in many {
                    if let Some((_, index)) = self.graphs.get(name) {
                        merged.merge(index);
                    }
                }
                Cow::Owned(merged)
            }
        }
    }

    pub fn resolve(&self, (s, p, o): Key) -> Triple {
        let iri = |id| match self.term(id) {
            Term::Iri(i) => i.clone(),
            Term::Literal(_) => unreachable!("subjects and predicates are IRIs"),
        };
        Triple {
            subject: iri(s),
            predicate: iri(p),
            object: self.term(o).clone(),
        }
    }

    /// Triples with `subject` as subject, across all graphs.
    pub fn describe(&self, subject: &Iri) -> Vec<Triple> {
        match self.id(&Term::Iri(subject.clone())) {
            Some(id) => self.union.scan(Some(id), None, None).map(|k| self.resolve(k)).collect(),
            None => Vec::new(),
        }
    }

    /// Whether `iri` occurs in any position of any loaded triple.
    pub fn mentions(&self, iri: &Iri) -> bool {
        let Some(id) = self.id(&Term::Iri(iri.clone())) else {
            return false;
        };
        let u = &self.union;
        u.scan(Some(id), None, None).next().is_some()
            || u.scan(None, Some(id), None).next().is_some()
            || u.scan(None, None, Some(id)).next().is_some()
    }

    /// Index invariants: every ordering holds the same triples, and the
    /// union equals the merge of the per-graph indexes.
    pub fn check_consistency(&self) -> bool {
        let mut union = Index::default();
        for (graph, index) in self.graphs.values() {
            if !index.consistent() || index.len() != graph.len() {
                return false;
            }
            let graph_ok = graph.iter().all(|t| {
                let id = |term: &Term| self.id(term);
                match (
                    id(&Term::Iri(t.subject.clone())),
                    id(&Term::Iri(t.predicate.clone())),
                    id(&t.object),
                ) {
                    (Some(s), Some(p), Some(o)) => index.spo.contains(&(s, p, o)),
                    _ => false,
                }
            });
            if !graph_ok {
                return false;
            }
            union.merge(index);
        }
        self.union.consistent() && union == self.union
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(triples: &[(&str, &str, &str)]) -> Graph {
        triples
            .iter()
            .map(|(s, p, o)| Triple::new(*s, *p, Term::literal(*o)))
            .collect()
    }

    #[test]
    fn load_replace_remove() {
        let mut store = TripleStore::new();
        store.load_graph("g", graph(&[("http://s", "http://p", "1"), ("http://s", "http://p", "2")]));
        assert_eq!(store.len(), 2);
        store.load_graph("g", graph(&[("http://s", "http://q", "3")]));
        assert_eq!(store.len(), 1);
        assert_eq!(store.graph("g").unwrap().name, "g");
        store.load_graph("h", graph(&[("http://s", "http://q", "3")]));
        assert_eq!(store.len(), 1);
        assert!(store.check_consistency());
        store.remove_graph("g");
        store.reindex();
        assert_eq!(store.len(), 1);
        assert!(store.check_consistency());
    }

    #[test]
    fn every_access_path_agrees_with_a_scan() {
        let mut store = TripleStore::new();
        let g = graph(&[
            ("http://a", "http://p", "x"),
            ("http://a", "http://q", "y"),
            ("http://b", "http://p", "x"),
            ("http://b", "http://p", "z"),
        ]);
        store.load_graph("g", g);
        let index = store.dataset(&[]);
        let all: Vec<Key> = index.scan(None, None, None).collect();
        for &(s, p, o) in &all {
            for mask in 0..8u8 {
                let pick = |bit: u8, v| (mask & bit != 0).then_some(v);
                let (bs, bp, bo) = (pick(1, s), pick(2, p), pick(4, o));
                let mut got: Vec<Key> = index.scan(bs, bp, bo).collect();
                got.sort();
                let want: Vec<Key> = all
                    .iter()
                    .copied()
                    .filter(|&(x, y, z)| bs.is_none_or(|v| v == x) && bp.is_none_or(|v| v == y) && bo.is_none_or(|v| v == z))
                    .collect();
                assert_eq!(got, want, "mask {mask}");
            }
        }
    }

    #[test]
    fn describe_and_mentions() {
        let mut store = TripleStore::new();
        store.load_graph("g", graph(&[("http://a", "http://p", "x")]));
        assert_eq!(store.describe(&Iri::new("http://a")).len(), 1);
        assert!(store.mentions(&Iri::new("http://p")));
        assert!(!store.mentions(&Iri::new("http://zzz")));
        assert!(store.dataset(&["absent".into()]).is_empty());
    }
}
