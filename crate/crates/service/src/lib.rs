//! HTTP facade over the outbreak knowledge graph.
//!
//! Routes: `GET|POST /sparql`, `GET /describe?url=`, `GET /api/events`,
//! `GET /api/facets`, `POST /admin/reload`, `GET /` plus static UI assets.
//! Paths under the graph namespace answer `303 See Other` pointing at
//! `/describe`.

pub mod events;
pub mod negotiate;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ekg_core::kg::vocab::{DEFAULT_GRAPH, EKG};
use ekg_core::kg::{serialize_ntriples, serialize_rdfxml_with_base, serialize_turtle_with_base};
use ekg_core::sparql::{evaluate, parse_query, serialize_results, ResultFormat};
use ekg_core::{Graph, Iri, KgConfig};

pub use events::{EventFilter, EventItem, EventPage, FacetValue, Facets, Snapshot, DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE};
use negotiate::negotiate;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: String,
    /// Namespace of records and properties; ends with `/`.
    pub base_iri: String,
    pub graph_name: String,
    /// Turtle file loaded at start-up and on reload.
    pub data: Option<PathBuf>,
    /// Directory holding the built UI bundle.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: DEFAULT_BIND.into(),
            base_iri: EKG.into(),
            graph_name: DEFAULT_GRAPH.into(),
            data: None,
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `EKG_BIND`, `EKG_DATA` and `EKG_STATIC`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let mut cfg = ServiceConfig::default();
        if let Some(bind) = var("EKG_BIND") {
            cfg.bind = bind;
        }
        cfg.data = var("EKG_DATA").map(PathBuf::from);
        cfg.static_dir = var("EKG_STATIC").map(PathBuf::from);
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.base_iri.ends_with('/') || !valid_iri(&self.base_iri) {
            return Err(format!("base IRI {:?} must be an absolute IRI ending in '/'", self.base_iri));
        }
        self.bind
            .parse::<SocketAddr>()
            .map(|_| ())
            .map_err(|e| format!("bind address {:?}: {e}", self.bind))
    }

    pub fn kg_config(&self) -> KgConfig {
        KgConfig {
            base_iri: self.base_iri.clone(),
            superclass: format!("{}Surveillance_process", self.base_iri),
            graph_name: self.graph_name.clone(),
            ..KgConfig::default()
        }
    }

    pub fn load_snapshot(&self) -> ekg_core::Result<Snapshot> {
        match &self.data {
            Some(path) => Snapshot::load(path, self.kg_config()),
            None => Ok(Snapshot::empty(self.kg_config())),
        }
    }
}

/// Shared state: the configuration and the current snapshot. Requests
/// clone the snapshot handle; a reload swaps it whole.
#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    snapshot: Arc<RwLock<Arc<Snapshot>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig, snapshot: Snapshot) -> Self {
        AppState {
            config: Arc::new(config),
            snapshot: Arc::new(RwLock::new(Arc::new(snapshot))),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn replace(&self, snapshot: Snapshot) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/sparql", get(sparql_get).post(sparql_post))
        .route("/describe", get(describe))
        .route("/api/events", get(events_api))
        .route("/api/facets", get(facets_api))
        .route("/admin/reload", post(reload))
        .fallback(fallback)
        .with_state(state)
}

/// Binds, serves until Ctrl-C, then drains in-flight requests.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    config.validate()?;
    let snapshot = config.load_snapshot()?;
    log::info!("loaded {} triples, {} records", snapshot.store.len(), snapshot.event_count());
    let listener = tokio::net::TcpListener::bind(&config.bind).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    let app = router(AppState::new(config, snapshot));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], message.into()).into_response()
}

fn body(media_type: &'static str, text: String) -> Response {
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static(media_type)),
            (header::VARY, HeaderValue::from_static("Accept")),
        ],
        text,
    )
        .into_response()
}

fn accept(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::ACCEPT).and_then(|v| v.to_str().ok())
}

/// Absolute IRI: a scheme, then no whitespace or characters IRIs exclude.
pub fn valid_iri(iri: &str) -> bool {
    let Some((scheme, rest)) = iri.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c))
        && !rest.is_empty()
        && !rest.chars().any(|c| c.is_control() || c.is_whitespace() || "<>\"{}|^`\\".contains(c))
}

// ---------------------------------------------------------------------------
// SPARQL

const RESULT_OFFERS: [(&str, ResultFormat); 7] = [
    ("application/json", ResultFormat::Json),
    ("application/sparql-results+json", ResultFormat::Json),
    ("application/xml", ResultFormat::Xml),
    ("application/sparql-results+xml", ResultFormat::Xml),
    ("text/xml", ResultFormat::Xml),
    ("text/csv", ResultFormat::Csv),
    ("text/html", ResultFormat::Html),
];

fn run_sparql(state: &AppState, text: &str, headers: &HeaderMap) -> Response {
    let query = match parse_query(text) {
        Ok(q) => q,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let result = evaluate(&query, &state.snapshot().store);
    let format = negotiate(accept(headers), &RESULT_OFFERS, ResultFormat::Json);
    body(format.media_type(), serialize_results(&result, format))
}

async fn sparql_get(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>, headers: HeaderMap) -> Response {
    match params.get("query") {
        Some(q) => run_sparql(&state, q, &headers),
        None => error(StatusCode::BAD_REQUEST, "missing query parameter"),
    }
}

/// Accepts `application/sparql-query` bodies and url-encoded forms.
async fn sparql_post(State(state): State<AppState>, headers: HeaderMap, payload: String) -> Response {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .map(|v| v.trim().to_ascii_lowercase());
    if content_type.as_deref() == Some("application/sparql-query") {
        return run_sparql(&state, &payload, &headers);
    }
    let query = form_urlencoded::parse(payload.as_bytes()).find(|(k, _)| k == "query").map(|(_, v)| v.into_owned());
    match query {
        Some(q) => run_sparql(&state, &q, &headers),
        None => error(StatusCode::BAD_REQUEST, "missing query parameter"),
    }
}

// ---------------------------------------------------------------------------
// Resource description

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RdfFormat {
    Turtle,
    RdfXml,
    NTriples,
}

const RDF_OFFERS: [(&str, RdfFormat); 3] = [
    ("text/turtle", RdfFormat::Turtle),
    ("application/rdf+xml", RdfFormat::RdfXml),
    ("application/n-triples", RdfFormat::NTriples),
];

async fn describe(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>, headers: HeaderMap) -> Response {
    let Some(url) = params.get("url") else {
        return error(StatusCode::BAD_REQUEST, "missing url parameter");
    };
    if !valid_iri(url) {
        return error(StatusCode::BAD_REQUEST, format!("invalid IRI {url:?}"));
    }
    let snapshot = state.snapshot();
    let iri = Iri::new(url.as_str());
    if !snapshot.store.mentions(&iri) {
        return error(StatusCode::NOT_FOUND, format!("{url} does not occur in the graph"));
    }
    let mut graph = Graph::new(snapshot.kg.graph_name.clone());
    graph.extend(snapshot.store.describe(&iri));
    let base = &state.config.base_iri;
    match negotiate(accept(&headers), &RDF_OFFERS, RdfFormat::Turtle) {
        RdfFormat::Turtle => body("text/turtle", serialize_turtle_with_base(&graph, base)),
        RdfFormat::NTriples => body("application/n-triples", serialize_ntriples(graph.iter())),
        RdfFormat::RdfXml => match serialize_rdfxml_with_base(&graph, base) {
            Ok(xml) => body("application/rdf+xml", xml),
            Err(e) => error(StatusCode::NOT_ACCEPTABLE, format!("not expressible as RDF/XML: {e}")),
        },
    }
}

// ---------------------------------------------------------------------------
// JSON API

fn parse_filter(params: &HashMap<String, String>) -> Result<EventFilter, String> {
    let text = |k: &str| params.get(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
    let number = |k: &str| -> Result<Option<i64>, String> {
        text(k).map(|v| v.parse::<i64>().map_err(|_| format!("{k} must be an integer, got {v:?}"))).transpose()
    };
    let year = number("year")?
        .map(|y| i32::try_from(y).map_err(|_| format!("year {y} out of range")))
        .transpose()?;
    let page = number("page")?.unwrap_or(1);
    if page < 1 {
        return Err(format!("page must be at least 1, got {page}"));
    }
    let page_size = number("page_size")?.unwrap_or(DEFAULT_PAGE_SIZE as i64);
    if !(1..=MAX_PAGE_SIZE as i64).contains(&page_size) {
        return Err(format!("page_size must be between 1 and {MAX_PAGE_SIZE}, got {page_size}"));
    }
    Ok(EventFilter {
        disease: text("disease"),
        country: text("country"),
        year,
        page: page as usize,
        page_size: page_size as usize,
    })
}

async fn events_api(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Response {
    match parse_filter(&params) {
        Ok(filter) => Json(state.snapshot().events(&filter)).into_response(),
        Err(message) => error(StatusCode::BAD_REQUEST, message),
    }
}

async fn facets_api(State(state): State<AppState>) -> Response {
    Json(state.snapshot().facets()).into_response()
}

async fn reload(State(state): State<AppState>) -> Response {
    if state.config.data.is_none() {
        return error(StatusCode::BAD_REQUEST, "no data file configured");
    }
    let config = state.config.clone();
    match tokio::task::spawn_blocking(move || config.load_snapshot()).await {
        Ok(Ok(snapshot)) => {
            let summary = serde_json::json!({"triples": snapshot.store.len(), "events": snapshot.event_count()});
            state.replace(snapshot);
            Json(summary).into_response()
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("reload failed, previous data kept: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

// ---------------------------------------------------------------------------
// UI and dereferencing

const FALLBACK_INDEX: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>eKG</title></head>
<body>
<h1>Epidemic knowledge graph</h1>
<ul>
<li><a href=\"/sparql?query=SELECT%20COUNT(*)%20WHERE%20%7B%3Fs%20%3Fp%20%3Fo%7D\">/sparql</a></li>
<li><a href=\"/api/facets\">/api/facets</a></li>
<li><a href=\"/api/events\">/api/events</a></li>
</ul>
</body></html>
";

async fn index(State(state): State<AppState>) -> Response {
    if let Some(dir) = &state.config.static_dir {
        if let Ok(html) = std::fs::read_to_string(dir.join("index.html")) {
            return body("text/html", html);
        }
    }
    body("text/html", FALLBACK_INDEX.to_string())
}

/// Path component of the namespace, e.g. `/dataset/<uuid>/`.
fn namespace_path(base: &str) -> Option<&str> {
    let after_scheme = &base[base.find("://")? + 3..];
    after_scheme.find('/').map(|i| &after_scheme[i..])
}

async fn fallback(State(state): State<AppState>, method: Method, uri: Uri) -> Response {
    if method != Method::GET && method != Method::HEAD {
        return error(StatusCode::METHOD_NOT_ALLOWED, "method not allowed");
    }
    let path = uri.path();
    let base = &state.config.base_iri;
    if let Some(local) = namespace_path(base).and_then(|ns| path.strip_prefix(ns)).filter(|l| !l.is_empty()) {
        let target: String = form_urlencoded::Serializer::new(String::new())
            .append_pair("url", &format!("{base}{local}"))
            .finish();
        return (StatusCode::SEE_OTHER, [(header::LOCATION, format!("/describe?{target}"))]).into_response();
    }
    if let Some(dir) = &state.config.static_dir {
        if let Some(file) = static_file(dir, path) {
            if let Ok(bytes) = std::fs::read(&file) {
                return ([(header::CONTENT_TYPE, content_type(&file))], bytes).into_response();
            }
        }
    }
    error(StatusCode::NOT_FOUND, format!("no resource at {path}"))
}

fn static_file(dir: &Path, path: &str) -> Option<PathBuf> {
    let rel = Path::new(path.trim_start_matches('/'));
    rel.components().all(|c| matches!(c, Component::Normal(_))).then(|| dir.join(rel)).filter(|p| p.is_file())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}
