//! Stage glue shared by the command line and the end-to-end tests.

use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::corpus::{ChunkingConfig, DonReport};
use crate::ensemble::{
    vote_corpus, EnsembleConfig, EnsembleRecord, FixtureLexicon, SynonymDictionaries, SynonymSources,
    TrigramEmbedder,
};
use crate::error::{Error, Result};
use crate::event::OutbreakEvent;
use crate::extract::{CompletionBackend, ExtractionRecord, Extractor, MockScript, RetryPolicy};
use crate::kg::{emit_csv, serialize_rdfxml_with_base, serialize_turtle_with_base, KgConfig};

/// File names written by [`write_artifacts`].
pub const TURTLE_FILE: &str = "epidemicIE.ttl";
pub const RDFXML_FILE: &str = "epidemicIE.rdf";
pub const CSV_FILE: &str = "epidemicIE.csv";

/// One value per line; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::InvalidRecord {
                id: record_id(line).unwrap_or_else(|| format!("line {}", i + 1)),
                message: e.to_string(),
            })
        })
        .collect()
}

fn record_id(line: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    value.get("fileid")?.as_str().map(str::to_string)
}

pub fn write_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn load_mock_script(path: &Path) -> Result<MockScript> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs every backend over every report. Output is report-major, backends
/// in the given order. Raw completions go to `audit` when given.
pub fn extract_corpus<'a>(
    reports: &[DonReport],
    backends: &[&'a dyn CompletionBackend],
    chunking: ChunkingConfig,
    retry: RetryPolicy,
    jobs: usize,
    audit: Option<&'a Mutex<dyn Write + Send + 'a>>,
) -> Vec<ExtractionRecord> {
    let per_backend: Vec<Vec<ExtractionRecord>> = backends
        .iter()
        .map(|b| {
            let mut extractor = Extractor::new(*b, chunking).with_retry(retry);
            if let Some(sink) = audit {
                extractor = extractor.with_audit(sink);
            }
            extractor.extract_all(reports, jobs)
        })
        .collect();
    (0..reports.len())
        .flat_map(|i| per_backend.iter().map(move |records| records[i].clone()))
        .collect()
}

/// Offline synonym resources: the built-in lexicon and trigram embeddings.
pub struct DefaultSynonyms {
    pub lexicon: FixtureLexicon,
    pub embedder: TrigramEmbedder,
    pub threshold: f64,
}

impl Default for DefaultSynonyms {
    fn default() -> Self {
        DefaultSynonyms {
            lexicon: FixtureLexicon::builtin(),
            embedder: TrigramEmbedder::default(),
            threshold: crate::ensemble::SimilarityConfig::DEFAULT_THRESHOLD,
        }
    }
}

impl DefaultSynonyms {
    pub fn with_threshold(threshold: f64) -> Self {
        DefaultSynonyms {
            threshold,
            ..Default::default()
        }
    }

    pub fn sources(&self) -> SynonymSources<'_> {
        SynonymSources {
            lexicon: &self.lexicon,
            disease_embeddings: &self.embedder,
            country_embeddings: &self.embedder,
            threshold: self.threshold,
        }
    }

    /// Dictionaries over every disease and country named in `events`.
    pub fn dictionaries_for_events(&self, events: &[OutbreakEvent]) -> SynonymDictionaries {
        self.sources().dictionaries(
            events.iter().filter_map(|e| e.disease.as_deref()),
            events.iter().filter_map(|e| e.country.as_deref()),
        )
    }
}

/// Builds corpus-wide dictionaries and fuses each report's records.
pub fn fuse(
    records: &[ExtractionRecord],
    synonyms: &DefaultSynonyms,
    cfg: &EnsembleConfig,
) -> Result<(Vec<EnsembleRecord>, SynonymDictionaries)> {
    let dicts = synonyms.sources().dictionaries_for(records);
    let fused = vote_corpus(records, &dicts, cfg)?;
    Ok((fused, dicts))
}

/// The three published serializations of one set of events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KgArtifacts {
    pub turtle: String,
    pub rdfxml: String,
    pub csv: String,
}

pub fn build_artifacts(events: &[OutbreakEvent], cfg: &KgConfig) -> Result<KgArtifacts> {
    let graph = cfg.build_graph(events);
    Ok(KgArtifacts {
        turtle: serialize_turtle_with_base(&graph, &cfg.base_iri),
        rdfxml: serialize_rdfxml_with_base(&graph, &cfg.base_iri)?,
        csv: emit_csv(events),
    })
}

pub fn write_artifacts(artifacts: &KgArtifacts, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in [
        (TURTLE_FILE, &artifacts.turtle),
        (RDFXML_FILE, &artifacts.rdfxml),
        (CSV_FILE, &artifacts.csv),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
