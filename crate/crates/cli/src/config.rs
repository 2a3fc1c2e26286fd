//! Pipeline configuration file (TOML).
//!
//! ```toml
//! corpus = "reports/"
//! output_dir = "out"
//! base_iri = "http://example.org/ekg/"
//! similarity_threshold = 0.8
//!
//! [chunking]
//! max_context_tokens = 8000
//!
//! [[backends]]
//! id = "meta-llama-3-70b-instruct"
//! url = "http://localhost:8000/v1/complete"
//! priority = 1
//! ```
//!
//! Relative paths resolve against the directory holding the file. A backend
//! URL of the form `mock:<path>` loads a scripted mock instead of calling
//! out over HTTP.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ekg_core::ensemble::SimilarityConfig;
use ekg_core::kg::vocab::EKG;
use ekg_core::{ChunkingConfig, EnsembleConfig};
use serde::Deserialize;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub id: String,
    pub url: String,
    /// Lower numbers win vote tie-breaks.
    #[serde(default)]
    pub priority: i64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub backends: Vec<BackendSpec>,
    pub chunking: ChunkingConfig,
    pub similarity_threshold: f64,
    pub output_dir: PathBuf,
    pub base_iri: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            backends: Vec::new(),
            chunking: ChunkingConfig::default(),
            similarity_threshold: SimilarityConfig::DEFAULT_THRESHOLD,
            output_dir: PathBuf::from("out"),
            base_iri: EKG.to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        cfg.corpus = cfg.corpus.map(|c| dir.join(c));
        cfg.output_dir = dir.join(&cfg.output_dir);
        for b in &mut cfg.backends {
            if let Some(rest) = b.url.strip_prefix("mock:") {
                b.url = format!("mock:{}", dir.join(rest).display());
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Err(e) = self.chunking.validate() {
            bail!("chunking: {e}");
        }
        if !(self.similarity_threshold > -1.0 && self.similarity_threshold < 1.0) {
            bail!("similarity_threshold must lie in (-1, 1), got {}", self.similarity_threshold);
        }
        if !self.base_iri.ends_with('/') || !ekg_service::valid_iri(&self.base_iri) {
            bail!("base_iri must be an absolute IRI ending in '/', got {:?}", self.base_iri);
        }
        let mut ids: Vec<&str> = self.backends.iter().map(|b| b.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            bail!("backend `{}` is listed twice", w[0]);
        }
        if let Some(b) = self.backends.iter().find(|b| b.id.trim().is_empty() || b.url.trim().is_empty()) {
            bail!("backend {:?} needs both an id and a url", b.id);
        }
        Ok(())
    }

    /// Backends ordered by priority, ties keeping file order.
    pub fn ranked_backends(&self) -> Vec<&BackendSpec> {
        let mut out: Vec<&BackendSpec> = self.backends.iter().collect();
        out.sort_by_key(|b| b.priority);
        out
    }

    /// Tie-break order for voting; the built-in order when no backends are
    /// configured.
    pub fn ensemble(&self, allow_any_count: bool) -> EnsembleConfig {
        let mut cfg = EnsembleConfig::default();
        if !self.backends.is_empty() {
            cfg.priority = self.ranked_backends().iter().map(|b| b.id.clone()).collect();
        }
        if allow_any_count {
            cfg.expected_records = None;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file_parses() {
        let cfg = PipelineConfig::parse(
            r#"
            corpus = "reports"
            output_dir = "build"
            similarity_threshold = 0.85

            [chunking]
            max_context_tokens = 4000

            [[backends]]
            id = "b"
            url = "http://localhost/b"
            priority = 2

            [[backends]]
            id = "a"
            url = "mock:a.json"
            priority = 1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.chunking.max_context_tokens, 4000);
        assert_eq!(cfg.chunking.ratio_words, ChunkingConfig::default().ratio_words);
        assert_eq!(cfg.ensemble(false).priority, ["a", "b"]);
        assert_eq!(cfg.ensemble(true).expected_records, None);
        assert_eq!(cfg.base_iri, EKG);
    }

    #[test]
    fn defaults_keep_the_builtin_priority() {
        let cfg = PipelineConfig::parse("").unwrap();
        assert_eq!(cfg.ensemble(false), EnsembleConfig::default());
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "unknown_key = 1",
            "similarity_threshold = 1.5",
            "base_iri = \"http://x.org/ns\"",
            "[chunking]\nmax_context_tokens = 0",
            "[[backends]]\nid = \"a\"\nurl = \"x\"\n[[backends]]\nid = \"a\"\nurl = \"y\"",
            "[[backends]]\nid = \"\"\nurl = \"x\"",
        ] {
            assert!(PipelineConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ekg.toml");
        std::fs::write(&path, "corpus = \"r\"\n[[backends]]\nid = \"m\"\nurl = \"mock:m.json\"\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.corpus.unwrap(), dir.path().join("r"));
        assert_eq!(cfg.backends[0].url, format!("mock:{}", dir.path().join("m.json").display()));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
    }
}
