//! Prompting completion backends and collecting per-model extractions.

mod backend;
mod parse;
mod prompt;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use backend::{
    CompletionBackend, CompletionRequest, HttpBackend, MockBackend, MockScript, RecordedCall,
    TransportError, BACKEND_TOKEN_ENV, BACKEND_URL_ENV,
};
pub use parse::{parse_count, parse_model_json, parse_strict_date};
pub use prompt::{build_extraction_prompt, build_prompt, build_summarize_prompt, PromptKind};

use crate::corpus::{chunk_text, estimate_tokens, ChunkingConfig, DonReport};

/// Upper bound on summarize-then-recheck rounds for over-long reports.
pub const MAX_SUMMARY_ROUNDS: usize = 3;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionStatus {
    #[default]
    Ok,
    EmptyInput,
    ParseFailure,
    BackendError {
        message: String,
    },
}

/// Five-field extraction produced by one model for one report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub fileid: String,
    pub model_id: String,
    pub disease: Option<String>,
    pub country: Option<String>,
    pub date: Option<NaiveDate>,
    pub cases: Option<u64>,
    pub deaths: Option<u64>,
    #[serde(default)]
    pub status: ExtractionStatus,
}

impl ExtractionRecord {
    pub fn empty(fileid: &str, model_id: &str) -> Self {
        ExtractionRecord {
            fileid: fileid.to_string(),
            model_id: model_id.to_string(),
            disease: None,
            country: None,
            date: None,
            cases: None,
            deaths: None,
            status: ExtractionStatus::Ok,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.disease.is_none()
            && self.country.is_none()
            && self.date.is_none()
            && self.cases.is_none()
            && self.deaths.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::ZERO,
        }
    }
}

/// One line of the JSON-lines audit log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub fileid: String,
    pub model_id: String,
    pub prompt_kind: PromptKind,
    pub raw: String,
}

/// Drives one backend over reports.
pub struct Extractor<'a> {
    backend: &'a dyn CompletionBackend,
    chunking: ChunkingConfig,
    retry: RetryPolicy,
    audit: Option<&'a Mutex<dyn Write + Send + 'a>>,
}

impl<'a> Extractor<'a> {
    pub fn new(backend: &'a dyn CompletionBackend, chunking: ChunkingConfig) -> Self {
        Extractor {
            backend,
            chunking,
            retry: RetryPolicy::default(),
            audit: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_audit(mut self, sink: &'a Mutex<dyn Write + Send + 'a>) -> Self {
        self.audit = Some(sink);
        self
    }

    /// Extracts the five fields from one report.
    ///
    /// Reports over the context budget are chunked and summarized first; the
    /// concatenated summaries are rechecked and summarized again, up to
    /// [`MAX_SUMMARY_ROUNDS`] rounds, before the extraction prompt is sent.
    pub fn extract_report(&self, report: &DonReport) -> ExtractionRecord {
        let model_id = self.backend.id();
        if report.body.trim().is_empty() {
            let mut record = ExtractionRecord::empty(&report.fileid, model_id);
            record.status = ExtractionStatus::EmptyInput;
            return record;
        }

        let budget = self.chunking.text_budget();
        let mut text = report.body.clone();
        for _ in 0..MAX_SUMMARY_ROUNDS {
            if estimate_tokens(&text, &self.chunking) <= budget {
                break;
            }
            let mut summaries = Vec::new();
            for chunk in chunk_text(&text, &self.chunking) {
                match self.call(&report.fileid, PromptKind::Summarize, &chunk) {
                    Ok(summary) => summaries.push(summary.trim().to_string()),
                    Err(e) => return self.failed(report, e),
                }
            }
            text = summaries.join(" ");
        }

        match self.call(&report.fileid, PromptKind::Extract, &text) {
            Ok(raw) => parse_model_json(&raw, &report.fileid, model_id),
            Err(e) => self.failed(report, e),
        }
    }

    /// Extracts every report, running up to `jobs` reports at once.
    ///
    /// Output order follows `reports` regardless of completion order.
    pub fn extract_all(&self, reports: &[DonReport], jobs: usize) -> Vec<ExtractionRecord> {
        let jobs = jobs.clamp(1, reports.len().max(1));
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<ExtractionRecord>>> = Mutex::new(vec![None; reports.len()]);
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(report) = reports.get(i) else { break };
                    let record = self.extract_report(report);
                    results.lock().unwrap()[i] = Some(record);
                });
            }
        });
        results
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|r| r.expect("every report is processed"))
            .collect()
    }

    fn failed(&self, report: &DonReport, error: TransportError) -> ExtractionRecord {
        log::warn!(
            "backend {} gave up on {}: {error}",
            self.backend.id(),
            report.fileid
        );
        let mut record = ExtractionRecord::empty(&report.fileid, self.backend.id());
        record.status = ExtractionStatus::BackendError {
            message: error.to_string(),
        };
        record
    }

    fn call(&self, fileid: &str, kind: PromptKind, text: &str) -> Result<String, TransportError> {
        let prompt = build_prompt(kind, text);
        let request = CompletionRequest {
            fileid,
            kind,
            prompt: &prompt,
        };
        let attempts = self.retry.attempts.max(1);
        let mut last_error = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.retry.base_delay * (1u32 << (attempt - 1).min(16));
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
            match self.backend.complete(&request) {
                Ok(raw) => {
                    self.log(fileid, kind, &raw);
                    return Ok(raw);
                }
                Err(e) => {
                    log::debug!("attempt {} for {fileid} failed: {e}", attempt + 1);
                    last_error = Some(e);
                }
            }
        }
        Err(last_error.expect("at least one attempt"))
    }

    fn log(&self, fileid: &str, kind: PromptKind, raw: &str) {
        let Some(sink) = self.audit else { return };
        let entry = AuditEntry {
            fileid: fileid.to_string(),
            model_id: self.backend.id().to_string(),
            prompt_kind: kind,
            raw: raw.to_string(),
        };
        let line = serde_json::to_string(&entry).expect("audit entries serialize");
        let mut sink = sink.lock().unwrap();
        if let Err(e) = writeln!(sink, "{line}") {
            log::warn!("audit log write failed: {e}");
        }
    }
}

/// Convenience wrapper over [`Extractor::extract_report`] with default retries.
pub fn extract_report(
    report: &DonReport,
    backend: &dyn CompletionBackend,
    cfg: &ChunkingConfig,
) -> ExtractionRecord {
    Extractor::new(backend, *cfg).extract_report(report)
}
