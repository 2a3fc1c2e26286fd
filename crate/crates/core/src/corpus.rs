//! Loading and segmenting outbreak reports.
//!
//! A report is identified by its URL slug (`31-may-2018-nipah-virus-india-en`).
//! Slugs that start with a `dd-monthname-yyyy` prefix carry the publication
//! date, which is kept as the report's imputed date.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

/// One outbreak report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DonReport {
    pub fileid: String,
    pub title: String,
    pub body: String,
    pub imputed_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

impl DonReport {
    /// Builds a report from raw text or HTML, cleaning the body and deriving
    /// the imputed date from the slug.
    pub fn from_raw(fileid: impl Into<String>, raw: &str) -> Self {
        let fileid = fileid.into();
        let title = extract_title(raw);
        DonReport {
            imputed_date: parse_slug(&fileid),
            title,
            body: clean_text(raw),
            source_url: None,
            fileid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub max_context_tokens: usize,
    /// Words per `tokens_per_ratio` tokens; 75 words per 100 tokens by default.
    pub ratio_words: usize,
    pub ratio_tokens: usize,
    /// Tokens reserved for the prompt template and the completion.
    pub prompt_overhead: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig {
            max_context_tokens: 8000,
            ratio_words: 75,
            ratio_tokens: 100,
            prompt_overhead: 512,
        }
    }
}

impl ChunkingConfig {
    /// Token budget left for report text once the prompt overhead is reserved.
    pub fn text_budget(&self) -> usize {
        self.max_context_tokens.saturating_sub(self.prompt_overhead).max(1)
    }

    /// Largest word count whose estimate fits in `tokens`.
    fn max_words_for(&self, tokens: usize) -> usize {
        (tokens * self.ratio_words / self.ratio_tokens).max(1)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.max_context_tokens == 0 {
            return Err("max_context_tokens must be positive".into());
        }
        if self.ratio_words == 0 || self.ratio_tokens == 0 {
            return Err("the words/tokens ratio must be positive".into());
        }
        Ok(())
    }
}

/// Parses the `dd-monthname-yyyy` prefix of a report slug.
pub fn parse_slug(slug: &str) -> Option<NaiveDate> {
    let mut parts = slug.splitn(4, '-');
    let day = parts.next()?;
    let month = parts.next()?;
    let year = parts.next()?;
    if day.is_empty() || day.len() > 2 || !day.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if year.len() != 4 || !year.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let month = MONTHS
        .iter()
        .position(|m| m.eq_ignore_ascii_case(month))? as u32
        + 1;
    NaiveDate::from_ymd_opt(year.parse().ok()?, month, day.parse().ok()?)
}

/// Formats a date the way report slugs do (`05-january-1997`).
pub fn format_slug_date(date: NaiveDate) -> String {
    use chrono::Datelike;
    format!(
        "{:02}-{}-{:04}",
        date.day(),
        MONTHS[date.month0() as usize],
        date.year()
    )
}

const INLINE_TAGS: &[&str] = &[
    "a", "abbr", "b", "bdi", "cite", "code", "em", "font", "i", "mark", "q", "s", "small",
    "span", "strong", "sub", "sup", "time", "u",
];

/// Strips markup, decodes entity references and collapses whitespace.
///
/// The passes repeat until the text stops changing, so the result is a fixed
/// point and the function is idempotent even for double-escaped input.
pub fn clean_text(raw: &str) -> String {
    let mut current = collapse_whitespace(raw);
    loop {
        let stripped = strip_markup(&current);
        let decoded = html_escape::decode_html_entities(&stripped);
        let next = collapse_whitespace(&decoded);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_markup(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find('<') {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        match scan_tag(tail) {
            Some(tag) => {
                let skip = match tag.raw_text_end(tail) {
                    Some(end) => end,
                    None => tag.len,
                };
                if !tag.inline {
                    out.push(' ');
                }
                rest = &tail[skip..];
            }
            None => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

struct Tag {
    len: usize,
    name: String,
    closing: bool,
    inline: bool,
}

impl Tag {
    /// For `<script>` and `<style>`, the offset just past the matching end tag.
    fn raw_text_end(&self, tail: &str) -> Option<usize> {
        if self.closing || !(self.name == "script" || self.name == "style") {
            return None;
        }
        let lower = tail.to_ascii_lowercase();
        let close = format!("</{}", self.name);
        let at = lower[self.len..].find(&close)? + self.len;
        let gt = tail[at..].find('>')?;
        Some(at + gt + 1)
    }
}

fn scan_tag(tail: &str) -> Option<Tag> {
    let bytes = tail.as_bytes();
    if tail.starts_with("<!--") {
        let end = tail[4..].find("-->")? + 4 + 3;
        return Some(Tag {
            len: end,
            name: String::new(),
            closing: false,
            inline: false,
        });
    }
    let second = *bytes.get(1)?;
    let (closing, name_start) = match second {
        b'/' => (true, 2),
        b'!' | b'?' => (false, 2),
        c if c.is_ascii_alphabetic() => (false, 1),
        _ => return None,
    };
    let end = tail.find('>')?;
    let name: String = tail[name_start..end]
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    if second == b'/' && name.is_empty() {
        return None;
    }
    let inline = INLINE_TAGS.contains(&name.as_str());
    Some(Tag {
        len: end + 1,
        name,
        closing,
        inline,
    })
}

fn extract_title(raw: &str) -> String {
    let lower = raw.to_ascii_lowercase();
    for tag in ["title", "h1"] {
        let open = format!("<{tag}");
        if let Some(at) = lower.find(&open) {
            if let Some(gt) = lower[at..].find('>') {
                let from = at + gt + 1;
                if let Some(end) = lower[from..].find(&format!("</{tag}")) {
                    return clean_text(&raw[from..from + end]);
                }
            }
        }
    }
    raw.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(clean_text)
        .unwrap_or_default()
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Estimated token count: `ceil(words * ratio_tokens / ratio_words)`.
pub fn estimate_tokens(text: &str, cfg: &ChunkingConfig) -> usize {
    words_to_tokens(word_count(text), cfg)
}

fn words_to_tokens(words: usize, cfg: &ChunkingConfig) -> usize {
    (words * cfg.ratio_tokens).div_ceil(cfg.ratio_words)
}

/// Splits a report body into pieces that each fit the text budget.
pub fn chunk_for_context(report: &DonReport, cfg: &ChunkingConfig) -> Vec<String> {
    chunk_text(&report.body, cfg)
}

pub fn chunk_text(text: &str, cfg: &ChunkingConfig) -> Vec<String> {
    let budget = cfg.text_budget();
    if estimate_tokens(text, cfg) <= budget {
        return vec![text.to_string()];
    }
    let max_words = cfg.max_words_for(budget);

    let mut chunks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for sentence in split_sentences(text) {
        let words: Vec<&str> = sentence.split_whitespace().collect();
        if words.len() > max_words {
            flush(&mut chunks, &mut current);
            for piece in words.chunks(max_words) {
                chunks.push(piece.join(" "));
            }
            continue;
        }
        if current.len() + words.len() > max_words {
            flush(&mut chunks, &mut current);
        }
        current.extend(words);
    }
    flush(&mut chunks, &mut current);
    chunks
}

fn flush(chunks: &mut Vec<String>, current: &mut Vec<&str>) {
    if !current.is_empty() {
        chunks.push(current.join(" "));
        current.clear();
    }
}

/// Sentence boundary: `.`, `!` or `?`, then whitespace, then an uppercase letter.
fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && chars[j].1.is_uppercase() {
                let end = chars[i + 1].0;
                out.push(&text[start..end]);
                start = chars[j].0;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// Files that could not be loaded; the rest of the corpus is still returned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub reports: Vec<DonReport>,
    pub skipped: Vec<SkippedFile>,
}

/// Loads a directory of `.txt`/`.html` files, a `fileid,path` CSV manifest,
/// or a JSON-lines file of already-ingested reports.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = if meta.is_dir() {
        load_directory(path)?
    } else {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => load_jsonl(path)?,
            _ => load_manifest(path)?,
        }
    };

    let mut seen = HashSet::new();
    for report in &corpus.reports {
        if !seen.insert(report.fileid.as_str()) {
            return Err(Error::DuplicateFileId(report.fileid.clone()));
        }
    }
    corpus.skipped.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(corpus)
}

fn is_report_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("txt" | "html" | "htm")
    )
}

fn load_directory(dir: &Path) -> Result<Corpus> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_report_file(p))
        .collect();
    files.sort();

    let mut corpus = Corpus::default();
    for file in files {
        let Some(stem) = file.file_stem().and_then(|s| s.to_str()) else {
            corpus.skipped.push(SkippedFile {
                path: file.clone(),
                reason: "file name is not valid UTF-8".into(),
            });
            continue;
        };
        let stem = stem.to_string();
        load_one(&mut corpus, stem, &file);
    }
    Ok(corpus)
}

fn load_one(corpus: &mut Corpus, fileid: String, file: &Path) {
    match fs::read(file) {
        Ok(bytes) => match String::from_utf8(bytes) {
            Ok(text) => corpus.reports.push(DonReport::from_raw(fileid, &text)),
            Err(e) => corpus.skipped.push(SkippedFile {
                path: file.to_path_buf(),
                reason: format!("malformed UTF-8: {e}"),
            }),
        },
        Err(e) => corpus.skipped.push(SkippedFile {
            path: file.to_path_buf(),
            reason: e.to_string(),
        }),
    }
}

fn load_manifest(manifest: &Path) -> Result<Corpus> {
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| Error::Manifest {
        path: manifest.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Manifest {
            path: manifest.to_path_buf(),
            message: e.to_string(),
        })?;
        let (Some(fileid), Some(rel)) = (row.get(0), row.get(1)) else {
            return Err(Error::Manifest {
                path: manifest.to_path_buf(),
                message: "expected two columns: fileid,path".into(),
            });
        };
        let fileid = fileid.trim().to_string();
        if fileid.is_empty() {
            return Err(Error::Manifest {
                path: manifest.to_path_buf(),
                message: "empty fileid".into(),
            });
        }
        if !seen.insert(fileid.clone()) {
            return Err(Error::DuplicateFileId(fileid));
        }
        load_one(&mut corpus, fileid, &base.join(rel.trim()));
    }
    Ok(corpus)
}

fn load_jsonl(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = Corpus::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let report: DonReport = serde_json::from_str(line).map_err(|e| Error::InvalidRecord {
            id: format!("{}:{}", path.display(), i + 1),
            message: e.to_string(),
        })?;
        if report.fileid.is_empty() {
            return Err(Error::InvalidRecord {
                id: format!("{}:{}", path.display(), i + 1),
                message: "empty fileid".into(),
            });
        }
        corpus.reports.push(report);
    }
    Ok(corpus)
}
