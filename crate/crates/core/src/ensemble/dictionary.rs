//! Synonym clusters over observed surface forms.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::normalize::syntactic_equivalent;
use super::similarity::{
    lexicon_synonym, semantic_similar, EmbeddingProvider, FieldKind, SimilarityConfig,
    SynonymLexicon,
};
use crate::error::{Error, Result};

/// Disjoint-set forest with path compression and union by rank.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
        true
    }
}

/// Partition of observed terms into synonym clusters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynonymDictionary {
    field_kind: FieldKind,
    clusters: Vec<Vec<String>>,
    canonical: Vec<String>,
    lookup: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryFile {
    field_kind: FieldKind,
    clusters: Vec<Vec<String>>,
    canonical: Vec<String>,
}

impl SynonymDictionary {
    /// Clusters `terms` into connected components of `related`.
    ///
    /// Each cluster's canonical form is its most frequent surface form in
    /// `terms`, ties going to the lexicographically smallest. Clusters are
    /// ordered by canonical form and their members sorted.
    pub fn from_relation<F>(terms: &[String], field_kind: FieldKind, mut related: F) -> Self
    where
        F: FnMut(&str, &str) -> bool,
    {
        let mut frequency: BTreeMap<&str, usize> = BTreeMap::new();
        for t in terms {
            *frequency.entry(t.as_str()).or_default() += 1;
        }
        let unique: Vec<&str> = frequency.keys().copied().collect();

        let mut forest = UnionFind::new(unique.len());
        for i in 0..unique.len() {
            for j in i + 1..unique.len() {
                if forest.find(i) != forest.find(j) && related(unique[i], unique[j]) {
                    forest.union(i, j);
                }
            }
        }

        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (i, term) in unique.iter().enumerate() {
            groups.entry(forest.find(i)).or_default().push(term.to_string());
        }
        let mut pairs: Vec<(String, Vec<String>)> = groups
            .into_values()
            .map(|members| {
                let canonical = members
                    .iter()
                    .max_by(|a, b| frequency[a.as_str()].cmp(&frequency[b.as_str()]).then(b.cmp(a)))
                    .expect("clusters are non-empty")
                    .clone();
                (canonical, members)
            })
            .collect();
        pairs.sort();
        let (canonical, clusters) = pairs.into_iter().unzip();
        Self::from_parts(field_kind, clusters, canonical)
    }

    fn from_parts(field_kind: FieldKind, clusters: Vec<Vec<String>>, canonical: Vec<String>) -> Self {
        let lookup = clusters
            .iter()
            .enumerate()
            .flat_map(|(i, members)| members.iter().map(move |m| (m.clone(), i)))
            .collect();
        SynonymDictionary {
            field_kind,
            clusters,
            canonical,
            lookup,
        }
    }

    pub fn field_kind(&self) -> FieldKind {
        self.field_kind
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    pub fn canonical_forms(&self) -> &[String] {
        &self.canonical
    }

    pub fn cluster_of(&self, term: &str) -> Option<usize> {
        self.lookup.get(term).copied()
    }

    pub fn canonical(&self, cluster: usize) -> &str {
        &self.canonical[cluster]
    }

    /// Canonical form of `term`, or `term` itself when it was never observed.
    pub fn canonicalize<'a>(&'a self, term: &'a str) -> &'a str {
        match self.cluster_of(term) {
            Some(c) => &self.canonical[c],
            None => term,
        }
    }

    pub fn same_cluster(&self, a: &str, b: &str) -> bool {
        match (self.cluster_of(a), self.cluster_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DictionaryFile {
            field_kind: self.field_kind,
            clusters: self.clusters.clone(),
            canonical: self.canonical.clone(),
        })
        .expect("dictionary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DictionaryFile = serde_json::from_str(text)?;
        let invalid = |message: &str| Error::InvalidRecord {
            id: format!("{} dictionary", file.field_kind),
            message: message.to_string(),
        };
        if file.clusters.len() != file.canonical.len() {
            return Err(invalid("clusters and canonical forms differ in length"));
        }
        let mut seen = std::collections::HashSet::new();
        for (members, canonical) in file.clusters.iter().zip(&file.canonical) {
            if !members.contains(canonical) {
                return Err(invalid("canonical form outside its cluster"));
            }
            for m in members {
                if !seen.insert(m) {
                    return Err(invalid("clusters overlap"));
                }
            }
        }
        Ok(Self::from_parts(file.field_kind, file.clusters, file.canonical))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Lexicon and embedding providers used to relate terms of one field kind.
pub struct SynonymResources<'a> {
    pub lexicon: &'a dyn SynonymLexicon,
    pub embeddings: &'a dyn EmbeddingProvider,
    pub config: SimilarityConfig,
}

impl SynonymResources<'_> {
    /// Syntactic equivalence, shared synsets, or embedding similarity.
    pub fn related(&self, a: &str, b: &str) -> bool {
        syntactic_equivalent(a, b)
            || lexicon_synonym(a, b, self.lexicon)
            || semantic_similar(a, b, self.embeddings, &self.config)
    }
}

pub fn build_synonym_dictionary(
    terms: &[String],
    lexicon: &dyn SynonymLexicon,
    provider: &dyn EmbeddingProvider,
    cfg: &SimilarityConfig,
) -> SynonymDictionary {
    let resources = SynonymResources {
        lexicon,
        embeddings: provider,
        config: *cfg,
    };
    let mut cache: HashMap<String, Option<Vec<f64>>> = HashMap::new();
    let mut embed = |t: &str| -> Option<Vec<f64>> {
        cache
            .entry(t.to_string())
            .or_insert_with(|| provider.embed(t).ok())
            .clone()
    };
    SynonymDictionary::from_relation(terms, cfg.field_kind, |a, b| {
        if syntactic_equivalent(a, b) || lexicon_synonym(a, b, resources.lexicon) {
            return true;
        }
        match (embed(a), embed(b)) {
            (Some(u), Some(v)) => super::similarity::cosine(&u, &v)
                .map(|s| s > cfg.semantic_threshold)
                .unwrap_or(false),
            _ => false,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::similarity::{FixtureLexicon, StaticEmbeddings, TrigramEmbedder};

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn printed_country_pair_clusters() {
        let terms = strings(&["Trinidad and Tobago", "Trinidad & Tobago", "France"]);
        let dict = build_synonym_dictionary(
            &terms,
            &FixtureLexicon::new(),
            &TrigramEmbedder::default(),
            &SimilarityConfig::new(FieldKind::Country),
        );
        assert_eq!(dict.len(), 2);
        assert!(dict.same_cluster("Trinidad and Tobago", "Trinidad & Tobago"));
        assert!(!dict.same_cluster("France", "Trinidad & Tobago"));
    }

    #[test]
    fn singleton() {
        let dict = SynonymDictionary::from_relation(&strings(&["Zika"]), FieldKind::Disease, |_, _| true);
        assert_eq!(dict.clusters(), &[strings(&["Zika"])]);
        assert_eq!(dict.canonical(0), "Zika");
    }

    #[test]
    fn chains_are_closed_transitively() {
        let related = |a: &str, b: &str| matches!((a, b), ("a", "b") | ("b", "a") | ("b", "c") | ("c", "b"));
        let dict = SynonymDictionary::from_relation(&strings(&["a", "b", "c"]), FieldKind::Disease, related);
        assert_eq!(dict.len(), 1);
        assert!(dict.same_cluster("a", "c"));
    }

    #[test]
    fn canonical_is_most_frequent_then_smallest() {
        let terms = strings(&["MERS", "MERS-CoV", "MERS-CoV", "mers"]);
        let dict = SynonymDictionary::from_relation(&terms, FieldKind::Disease, |_, _| true);
        assert_eq!(dict.canonical(0), "MERS-CoV");
        let dict = SynonymDictionary::from_relation(&strings(&["b", "a"]), FieldKind::Disease, |_, _| true);
        assert_eq!(dict.canonical(0), "a");
    }

    #[test]
    fn semantic_pair_from_fixture_geometry() {
        let emb = StaticEmbeddings::new(2)
            .with("Middle East respiratory syndrome", vec![1.0, 0.05])
            .with("MERS-CoV", vec![1.0, 0.0])
            .with("Dengue", vec![0.0, 1.0]);
        let terms = strings(&["MERS-CoV", "Middle East respiratory syndrome", "Dengue"]);
        let dict = build_synonym_dictionary(
            &terms,
            &FixtureLexicon::new(),
            &emb,
            &SimilarityConfig::new(FieldKind::Disease),
        );
        assert_eq!(dict.len(), 2);
        assert!(dict.same_cluster("MERS-CoV", "Middle East respiratory syndrome"));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let dict = SynonymDictionary::from_relation(
            &strings(&["x", "y", "z"]),
            FieldKind::Country,
            |a, b| (a, b) == ("x", "y"),
        );
        let back = SynonymDictionary::from_json(&dict.to_json()).unwrap();
        assert_eq!(back, dict);
        let bad = r#"{"field_kind":"country","clusters":[["a"],["a","b"]],"canonical":["a","b"]}"#;
        assert!(SynonymDictionary::from_json(bad).is_err());
        let bad = r#"{"field_kind":"country","clusters":[["a"]],"canonical":["b"]}"#;
        assert!(SynonymDictionary::from_json(bad).is_err());
    }

    #[test]
    fn union_find_merges() {
        let mut uf = UnionFind::new(4);
        assert!(uf.union(0, 1));
        assert!(!uf.union(1, 0));
        uf.union(2, 3);
        assert_ne!(uf.find(0), uf.find(2));
        uf.union(1, 3);
        assert_eq!(uf.find(0), uf.find(2));
    }
}
