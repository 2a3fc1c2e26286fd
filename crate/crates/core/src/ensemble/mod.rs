//! Synonym clustering and majority voting across backends.

mod dictionary;
mod normalize;
mod similarity;
mod vote;

pub use dictionary::{build_synonym_dictionary, SynonymDictionary, SynonymResources, UnionFind};
pub use normalize::{normalize_term, syntactic_equivalent};
pub use similarity::{
    cosine, lexicon_synonym, semantic_similar, EmbeddingProvider, FieldKind, FixtureLexicon,
    SimilarityConfig, StaticEmbeddings, SynonymLexicon, TrigramEmbedder,
};
pub use vote::{
    ensemble_record, majority_vote, majority_vote_numeric, majority_vote_text, vote_corpus,
    EnsembleConfig, EnsembleRecord, FieldProvenance, SynonymDictionaries, TallyEntry, Vote,
    WinRule,
};

use crate::extract::ExtractionRecord;

/// Lexicon plus one embedding provider per field kind.
pub struct SynonymSources<'a> {
    pub lexicon: &'a dyn SynonymLexicon,
    pub disease_embeddings: &'a dyn EmbeddingProvider,
    pub country_embeddings: &'a dyn EmbeddingProvider,
    pub threshold: f64,
}

impl SynonymSources<'_> {
    fn config(&self, kind: FieldKind) -> SimilarityConfig {
        SimilarityConfig {
            semantic_threshold: self.threshold,
            field_kind: kind,
        }
    }

    /// Builds corpus-wide dictionaries from every observed surface form.
    pub fn dictionaries<'r>(
        &self,
        diseases: impl IntoIterator<Item = &'r str>,
        countries: impl IntoIterator<Item = &'r str>,
    ) -> SynonymDictionaries {
        let diseases: Vec<String> = diseases.into_iter().map(str::to_string).collect();
        let countries: Vec<String> = countries.into_iter().map(str::to_string).collect();
        SynonymDictionaries {
            disease: build_synonym_dictionary(
                &diseases,
                self.lexicon,
                self.disease_embeddings,
                &self.config(FieldKind::Disease),
            ),
            country: build_synonym_dictionary(
                &countries,
                self.lexicon,
                self.country_embeddings,
                &self.config(FieldKind::Country),
            ),
        }
    }

    pub fn dictionaries_for(&self, records: &[ExtractionRecord]) -> SynonymDictionaries {
        self.dictionaries(
            records.iter().filter_map(|r| r.disease.as_deref()),
            records.iter().filter_map(|r| r.country.as_deref()),
        )
    }
}
