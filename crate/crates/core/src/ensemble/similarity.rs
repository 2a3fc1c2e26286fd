//! Lexical and embedding-based term similarity.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Disease,
    Country,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Disease => "disease",
            FieldKind::Country => "country",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub semantic_threshold: f64,
    pub field_kind: FieldKind,
}

impl SimilarityConfig {
    pub const DEFAULT_THRESHOLD: f64 = 0.8;

    pub fn new(field_kind: FieldKind) -> Self {
        SimilarityConfig {
            semantic_threshold: Self::DEFAULT_THRESHOLD,
            field_kind,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Vector("similarity threshold must lie in [0, 1]"));
        }
        self.semantic_threshold = threshold;
        Ok(self)
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Vector("dimension mismatch"));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Vector("zero vector"));
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Maps a term to a fixed-dimension vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Hashed character-trigram counts; offline and deterministic.
#[derive(Clone, Debug)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl TrigramEmbedder {
    pub fn new(dimension: usize) -> Self {
        TrigramEmbedder {
            dimension: dimension.max(1),
        }
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        TrigramEmbedder::new(512)
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

impl EmbeddingProvider for TrigramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dimension];
        let words: Vec<String> = text
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(|w| format!("  {w} "))
            .collect();
        for word in &words {
            let chars: Vec<char> = word.chars().collect();
            for gram in chars.windows(3) {
                let mut buf = [0u8; 12];
                let mut len = 0;
                for c in gram {
                    len += c.encode_utf8(&mut buf[len..]).len();
                }
                let slot = (fnv1a(buf[..len].iter().copied()) % self.dimension as u64) as usize;
                v[slot] += 1.0;
            }
        }
        Ok(v)
    }
}

/// Precomputed vectors, e.g. exported from a sentence-embedding model.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StaticEmbeddings {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl StaticEmbeddings {
    pub fn new(dimension: usize) -> Self {
        StaticEmbeddings {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::Vector("dimension mismatch"));
        }
        self.vectors.insert(term.into(), vector);
        Ok(())
    }

    pub fn with(mut self, term: &str, vector: Vec<f64>) -> Self {
        self.insert(term, vector).expect("vector of the declared dimension");
        self
    }
}

impl EmbeddingProvider for StaticEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or(Error::Vector("term has no stored embedding"))
    }
}

/// Lexical database lookup: term → synset ids.
pub trait SynonymLexicon: Send + Sync {
    fn synsets(&self, term: &str) -> BTreeSet<String>;
}

/// Small in-memory lexicon keyed by lower-cased lemma.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FixtureLexicon {
    synsets: HashMap<String, Vec<String>>,
    #[serde(skip)]
    index: HashMap<String, BTreeSet<String>>,
}

fn lemma_key(term: &str) -> String {
    term.to_lowercase()
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl FixtureLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_synset(mut self, id: &str, lemmas: &[&str]) -> Self {
        self.add_synset(id, lemmas.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn add_synset(&mut self, id: &str, lemmas: Vec<String>) {
        for lemma in &lemmas {
            self.index
                .entry(lemma_key(lemma))
                .or_default()
                .insert(id.to_string());
        }
        self.synsets.entry(id.to_string()).or_default().extend(lemmas);
    }

    /// Reads `{"synsets": {"id": ["lemma", ...]}}`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: FixtureLexicon = serde_json::from_str(&text)?;
        let mut lexicon = FixtureLexicon::new();
        let mut ids: Vec<_> = parsed.synsets.into_iter().collect();
        ids.sort();
        for (id, lemmas) in ids {
            lexicon.add_synset(&id, lemmas);
        }
        Ok(lexicon)
    }

    /// Disease and country synonyms common in outbreak reporting.
    pub fn builtin() -> Self {
        FixtureLexicon::new()
            .with_synset("influenza.n.01", &["influenza", "flu", "grippe"])
            .with_synset("bird_flu.n.01", &["avian influenza", "bird flu", "avian flu"])
            .with_synset(
                "dengue.n.01",
                &["dengue", "dengue fever", "breakbone fever", "dandy fever"],
            )
            .with_synset(
                "cholera.n.01",
                &["cholera", "asiatic cholera", "epidemic cholera", "indian cholera"],
            )
            .with_synset("yellow_fever.n.01", &["yellow fever", "yellow jack", "black vomit"])
            .with_synset("sars.n.01", &["sars", "severe acute respiratory syndrome"])
            .with_synset(
                "mers.n.01",
                &[
                    "mers",
                    "mers-cov",
                    "merscov",
                    "mers cov",
                    "middle east respiratory syndrome",
                    "middle east respiratory syndrome coronavirus",
                ],
            )
            .with_synset(
                "ebola.n.01",
                &["ebola", "ebola fever", "ebola hemorrhagic fever", "ebola virus disease"],
            )
            .with_synset("measles.n.01", &["measles", "rubeola", "morbilli"])
            .with_synset("plague.n.01", &["plague", "bubonic plague", "pestis", "glandular plague"])
            .with_synset(
                "united_states.n.01",
                &["united states", "united states of america", "usa", "us", "u.s.", "america"],
            )
            .with_synset(
                "united_kingdom.n.01",
                &["united kingdom", "uk", "u.k.", "britain", "great britain"],
            )
            .with_synset(
                "netherlands.n.01",
                &["netherlands", "the netherlands", "holland", "kingdom of the netherlands"],
            )
            .with_synset(
                "congo.n.03",
                &["democratic republic of the congo", "democratic republic of congo", "zaire", "drc"],
            )
            .with_synset("vietnam.n.01", &["vietnam", "viet nam", "socialist republic of vietnam"])
            .with_synset("tanzania.n.01", &["tanzania", "united republic of tanzania"])
            .with_synset("ivory_coast.n.01", &["ivory coast", "cote d'ivoire", "côte d'ivoire"])
    }
}

impl SynonymLexicon for FixtureLexicon {
    fn synsets(&self, term: &str) -> BTreeSet<String> {
        self.index.get(&lemma_key(term)).cloned().unwrap_or_default()
    }
}

pub fn lexicon_synonym(a: &str, b: &str, lexicon: &dyn SynonymLexicon) -> bool {
    let left = lexicon.synsets(a);
    if left.is_empty() {
        return false;
    }
    !left.is_disjoint(&lexicon.synsets(b))
}

/// `cosine(embed(a), embed(b)) > threshold`; provider errors count as "not similar".
pub fn semantic_similar(
    a: &str,
    b: &str,
    provider: &dyn EmbeddingProvider,
    cfg: &SimilarityConfig,
) -> bool {
    let pair = provider.embed(a).and_then(|u| {
        let v = provider.embed(b)?;
        cosine(&u, &v)
    });
    match pair {
        Ok(sim) => sim > cfg.semantic_threshold,
        Err(e) => {
            log::debug!("semantic comparison of {a:?} and {b:?} skipped: {e}");
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_values() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 32 / sqrt(14 * 77)
        let expected = 32.0 / (14.0f64 * 77.0).sqrt();
        assert!((expected - 0.974_631_846).abs() < 1e-9);
        assert!((cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - expected).abs() < 1e-12);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn lexicon_overlap() {
        let lex = FixtureLexicon::new().with_synset("flu", &["grippe", "influenza"]);
        assert!(lexicon_synonym("grippe", "Influenza", &lex));
        assert!(!lexicon_synonym("unknown", "influenza", &lex));
        assert!(!lexicon_synonym("unknown", "unknown", &lex));
        assert!(lexicon_synonym("grippe", "grippe", &lex));
    }

    #[test]
    fn threshold_is_strict() {
        let cfg = SimilarityConfig::new(FieldKind::Disease);
        let angle = |c: f64| vec![c, (1.0 - c * c).sqrt()];
        let provider = StaticEmbeddings::new(2)
            .with("base", vec![1.0, 0.0])
            .with("near", angle(0.81))
            .with("far", angle(0.79));
        assert!(semantic_similar("base", "near", &provider, &cfg));
        assert!(!semantic_similar("base", "far", &provider, &cfg));
        assert!(!semantic_similar("base", "missing", &provider, &cfg));
        assert!(semantic_similar("far", "far", &provider, &cfg));
    }

    #[test]
    fn trigram_embedder_basics() {
        let e = TrigramEmbedder::default();
        let cfg = SimilarityConfig::new(FieldKind::Country);
        assert!(semantic_similar("Saudi Arabia", "Saudi Arabia", &e, &cfg));
        assert!(semantic_similar("Democratic Republic of Congo", "Democratic Republic of the Congo", &e, &cfg));
        assert!(!semantic_similar("Dengue", "Ebola", &e, &cfg));
        assert!(!semantic_similar("", "", &e, &cfg));
        assert_eq!(e.embed("x").unwrap().len(), 512);
    }

    #[test]
    fn threshold_bounds() {
        let cfg = SimilarityConfig::new(FieldKind::Disease);
        assert!(cfg.with_threshold(1.2).is_err());
        assert_eq!(cfg.with_threshold(0.5).unwrap().semantic_threshold, 0.5);
    }
}
