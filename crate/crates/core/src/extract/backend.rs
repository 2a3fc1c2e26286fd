//! Completion backends: an HTTP JSON endpoint and a scriptable mock.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::PromptKind;

pub const BACKEND_URL_ENV: &str = "EKG_BACKEND_URL";
pub const BACKEND_TOKEN_ENV: &str = "EKG_BACKEND_TOKEN";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletionRequest<'a> {
    pub fileid: &'a str,
    pub kind: PromptKind,
    pub prompt: &'a str,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// A text-completion model behind a request/response contract.
pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, TransportError>;
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Backend speaking `POST {model, prompt, max_tokens}` → `{text}`.
pub struct HttpBackend {
    id: String,
    url: String,
    token: Option<String>,
    max_tokens: usize,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(id: impl Into<String>, url: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(true)
            .build()
            .into();
        HttpBackend {
            id: id.into(),
            url: url.into(),
            token: None,
            max_tokens: 512,
            agent,
        }
    }

    /// URL from `EKG_BACKEND_URL` unless given, token from `EKG_BACKEND_TOKEN`.
    pub fn from_env(id: impl Into<String>, url: Option<String>) -> Option<Self> {
        let url = url.or_else(|| std::env::var(BACKEND_URL_ENV).ok())?;
        let mut backend = HttpBackend::new(id, url);
        backend.token = std::env::var(BACKEND_TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Some(backend)
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens;
        self
    }
}

impl CompletionBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, TransportError> {
        let body = WireRequest {
            model: &self.id,
            prompt: request.prompt,
            max_tokens: self.max_tokens,
        };
        let mut call = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call
            .send_json(&body)
            .map_err(|e| TransportError(e.to_string()))?;
        let parsed: WireResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(parsed.text)
    }
}

/// Scripted responses for one mock backend, keyed by fileid and prompt kind.
///
/// Successive calls for the same key walk the list; the last entry repeats.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub id: String,
    #[serde(default)]
    pub responses: HashMap<String, HashMap<PromptKind, Vec<String>>>,
    /// Response for keys missing from `responses`.
    #[serde(default)]
    pub fallback: Option<String>,
    /// Number of leading calls that fail with a transport error.
    #[serde(default)]
    pub fail_first: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordedCall {
    pub fileid: String,
    pub kind: PromptKind,
    pub prompt: String,
}

/// Deterministic backend for tests and offline runs.
pub struct MockBackend {
    script: MockScript,
    state: Mutex<MockState>,
}

#[derive(Default)]
struct MockState {
    cursors: HashMap<(String, PromptKind), usize>,
    calls: Vec<RecordedCall>,
    failures: usize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            state: Mutex::new(MockState::default()),
        }
    }

    pub fn with_id(id: impl Into<String>) -> Self {
        Self::new(MockScript {
            id: id.into(),
            ..Default::default()
        })
    }

    pub fn respond(mut self, fileid: &str, kind: PromptKind, response: impl Into<String>) -> Self {
        self.script
            .responses
            .entry(fileid.to_string())
            .or_default()
            .entry(kind)
            .or_default()
            .push(response.into());
        self
    }

    pub fn failing_first(mut self, n: usize) -> Self {
        self.script.fail_first = n;
        self
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.state.lock().unwrap().calls.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().unwrap().calls.len()
    }
}

impl CompletionBackend for MockBackend {
    fn id(&self) -> &str {
        &self.script.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, TransportError> {
        let mut state = self.state.lock().unwrap();
        state.calls.push(RecordedCall {
            fileid: request.fileid.to_string(),
            kind: request.kind,
            prompt: request.prompt.to_string(),
        });
        if state.failures < self.script.fail_first {
            state.failures += 1;
            return Err(TransportError("scripted failure".into()));
        }
        let scripted = self
            .script
            .responses
            .get(request.fileid)
            .and_then(|by_kind| by_kind.get(&request.kind))
            .filter(|list| !list.is_empty());
        match scripted {
            Some(list) => {
                let cursor = state
                    .cursors
                    .entry((request.fileid.to_string(), request.kind))
                    .or_default();
                let response = list[(*cursor).min(list.len() - 1)].clone();
                *cursor += 1;
                Ok(response)
            }
            None => self
                .script
                .fallback
                .clone()
                .ok_or_else(|| TransportError(format!("no scripted response for {}", request.fileid))),
        }
    }
}
