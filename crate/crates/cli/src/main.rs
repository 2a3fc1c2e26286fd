//! `ekg`: run the outbreak knowledge-graph pipeline one stage at a time.
//!
//! Stages hand records to each other as JSON-lines files:
//! `ingest` → reports.jsonl → `extract` → extractions.jsonl → `vote` →
//! ensemble.jsonl → `build-kg` → epidemicIE.{ttl,rdf,csv}.
//!
//! Exit status: 0 on success, 1 for usage or input errors, 2 for internal
//! failures.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ekg", version, about = "Outbreak report extraction and knowledge-graph pipeline")]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, env = "EKG_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and clean a report corpus into reports.jsonl.
    Ingest(IngestArgs),
    /// Query every backend for every report, writing extractions.jsonl.
    Extract(ExtractArgs),
    /// Fuse per-backend extractions by majority vote into ensemble.jsonl.
    Vote(VoteArgs),
    /// Publish fused records as Turtle, RDF/XML and CSV.
    BuildKg(BuildKgArgs),
    /// Serve SPARQL, resource descriptions and the events API over HTTP.
    Serve(ServeArgs),
    /// Score predictions against a gold standard.
    Eval(EvalArgs),
    /// Dataset summary, top counts, outbreak time series and regression.
    Stats(StatsArgs),
    /// Run a SPARQL query against a Turtle file.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of .txt/.html reports, a fileid,path manifest or a .jsonl file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output file [default: <output_dir>/reports.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Reports from `ingest` [default: <output_dir>/reports.jsonl].
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output file [default: <output_dir>/extractions.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Backend as ID=URL, highest priority first; replaces configured backends.
    /// URL may be `mock:<script.json>`. Without a URL, EKG_BACKEND_URL is used.
    #[arg(long = "backend", value_name = "ID=URL")]
    pub backends: Vec<String>,
    /// Reports processed in parallel per backend.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// JSON-lines log of every raw completion.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    /// Delay before the first retry of a failed call, doubled per attempt.
    #[arg(long, default_value_t = 500)]
    pub retry_delay_ms: u64,
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    /// Extractions from `extract` [default: <output_dir>/extractions.jsonl].
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output file [default: <output_dir>/ensemble.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Vote with however many backends answered instead of exactly three.
    #[arg(long)]
    pub allow_any_count: bool,
    /// Cosine threshold for joining synonym clusters [default: from config].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also write the synonym dictionaries used, as JSON.
    #[arg(long)]
    pub dictionaries: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildKgArgs {
    /// Fused records (.jsonl) or a published CSV [default: <output_dir>/ensemble.jsonl].
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output directory [default: <output_dir>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sequence number of the first record IRI.
    #[arg(long, default_value_t = 1)]
    pub first_seq: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Turtle file to load.
    #[arg(long, env = "EKG_DATA")]
    pub data: Option<PathBuf>,
    /// Listen address.
    #[arg(long, env = "EKG_BIND", default_value = ekg_service::DEFAULT_BIND)]
    pub bind: String,
    /// Directory with the built UI bundle.
    #[arg(long = "static", env = "EKG_STATIC")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions: a CSV in the published layout or fused records (.jsonl).
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold standard CSV in the published layout.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Records: published CSV, fused records (.jsonl) or a graph (.ttl).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Rows per ranking.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
    /// Count surface forms as written instead of merging synonyms.
    #[arg(long)]
    pub raw_labels: bool,
    /// Print the case time series of this disease (needs --country).
    #[arg(long, requires = "country")]
    pub disease: Option<String>,
    #[arg(long, requires = "disease")]
    pub country: Option<String>,
    /// Sum the series per calendar year.
    #[arg(long, requires = "disease")]
    pub yearly: bool,
    /// Regress yearly series totals on reference yearly counts from a
    /// `year,count` CSV.
    #[arg(long, requires = "disease", value_name = "CSV")]
    pub regress_against: Option<PathBuf>,
    /// Leave these years out of the regression.
    #[arg(long, value_name = "YEAR")]
    pub exclude_year: Vec<i32>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Turtle file to query.
    #[arg(long)]
    pub data: PathBuf,
    /// Query text; use --file to read it from a file.
    #[arg(required_unless_present = "file", conflicts_with = "file")]
    pub query: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Graph name the data is loaded under.
    #[arg(long, default_value = ekg_core::kg::vocab::DEFAULT_GRAPH)]
    pub graph: String,
    #[arg(long, value_enum, default_value_t = ResultKind::Csv)]
    pub format: ResultKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ResultKind {
    Json,
    Xml,
    Csv,
    Html,
}

/// A failure and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn user(msg: impl std::fmt::Display) -> Self {
        Failure::User(anyhow::anyhow!("{msg}"))
    }
}

impl From<ekg_core::Error> for Failure {
    fn from(e: ekg_core::Error) -> Self {
        use ekg_core::Error as E;
        use std::io::ErrorKind;
        match &e {
            E::Io { error, .. }
                if !matches!(
                    error.kind(),
                    ErrorKind::NotFound | ErrorKind::PermissionDenied | ErrorKind::InvalidData | ErrorKind::IsADirectory
                ) =>
            {
                Failure::Internal(e.into())
            }
            E::Backend { .. } | E::RdfXml(_) | E::Vector(_) => Failure::Internal(e.into()),
            _ => Failure::User(e.into()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
