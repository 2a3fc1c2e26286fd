use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use ekg_core::analytics::{
    dataset_summary, ols_regression, time_series, top_counts, yearly_aggregate, CountKey, Labeler,
};
use ekg_core::corpus::load_corpus;
use ekg_core::eval::{evaluate_corpus, parse_gold_csv};
use ekg_core::extract::{CompletionBackend, HttpBackend, MockBackend, RetryPolicy};
use ekg_core::kg::{parse_csv, parse_turtle};
use ekg_core::pipeline::{
    build_artifacts, extract_corpus, fuse, load_mock_script, read_jsonl_file, write_artifacts, write_jsonl,
    DefaultSynonyms, CSV_FILE, RDFXML_FILE, TURTLE_FILE,
};
use ekg_core::sparql::{evaluate, parse_query, serialize_results, ResultFormat};
use ekg_core::{DonReport, Error, ExtractionRecord, KgConfig, OutbreakEvent, TripleStore};
use ekg_service::ServiceConfig;

use crate::config::{BackendSpec, PipelineConfig};
use crate::table::Table;
use crate::*;

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(Failure::User)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(&config, a),
        Command::Extract(a) => extract(&config, a),
        Command::Vote(a) => vote(&config, a),
        Command::BuildKg(a) => build_kg(&config, a),
        Command::Serve(a) => serve(&config, a),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
        Command::Query(a) => query(a),
    }
}

fn stage_path(given: Option<PathBuf>, config: &PipelineConfig, default_name: &str) -> PathBuf {
    given.unwrap_or_else(|| config.output_dir.join(default_name))
}

fn write_file(path: &Path, body: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::from(Error::io(dir, e)))?;
    }
    fs::write(path, body).map_err(|e| Failure::from(Error::io(path, e)))
}

// ---------------------------------------------------------------------------

fn ingest(config: &PipelineConfig, args: IngestArgs) -> Outcome {
    let corpus_path = args
        .corpus
        .or_else(|| config.corpus.clone())
        .ok_or_else(|| Failure::user("no corpus given: pass --corpus or set `corpus` in the config"))?;
    let corpus = load_corpus(&corpus_path)?;
    for skipped in &corpus.skipped {
        log::warn!("skipped {}: {}", skipped.path.display(), skipped.reason);
    }
    let out = stage_path(args.out, config, "reports.jsonl");
    write_file(&out, &write_jsonl(&corpus.reports))?;
    eprintln!("{} reports -> {} ({} skipped)", corpus.reports.len(), out.display(), corpus.skipped.len());
    Ok(())
}

// ---------------------------------------------------------------------------

fn parse_backend_flag(flag: &str, priority: i64) -> Result<BackendSpec, Failure> {
    let (id, url) = match flag.split_once('=') {
        Some((id, url)) => (id.trim(), url.trim().to_string()),
        None => (
            flag.trim(),
            std::env::var(ekg_core::extract::BACKEND_URL_ENV)
                .map_err(|_| Failure::user(format!("backend `{flag}` has no URL and EKG_BACKEND_URL is unset")))?,
        ),
    };
    if id.is_empty() || url.is_empty() {
        return Err(Failure::user(format!("backend `{flag}` must be ID=URL")));
    }
    Ok(BackendSpec { id: id.to_string(), url, priority })
}

fn open_backend(backend_spec: &BackendSpec) -> Result<Box<dyn CompletionBackend>, Failure> {
    if let Some(path) = backend_spec.url.strip_prefix("mock:") {
        let mut script = load_mock_script(Path::new(path))?;
        script.id = backend_spec.id.clone();
        return Ok(Box::new(MockBackend::new(script)));
    }
    let mut backend = HttpBackend::from_env(backend_spec.id.clone(), Some(backend_spec.url.clone())).expect("url given");
    if let Ok(token) = std::env::var(ekg_core::extract::BACKEND_TOKEN_ENV) {
        if !token.is_empty() {
            backend = backend.with_token(token);
        }
    }
    Ok(Box::new(backend))
}

fn validate_reports(reports: &[DonReport]) -> Outcome {
    let mut seen = BTreeSet::new();
    for (i, r) in reports.iter().enumerate() {
        if r.fileid.trim().is_empty() {
            return Err(Error::InvalidRecord { id: format!("line {}", i + 1), message: "empty fileid".into() }.into());
        }
        if !seen.insert(r.fileid.as_str()) {
            return Err(Error::DuplicateFileId(r.fileid.clone()).into());
        }
    }
    Ok(())
}

fn extract(config: &PipelineConfig, args: ExtractArgs) -> Outcome {
    let specs: Vec<BackendSpec> = if args.backends.is_empty() {
        config.ranked_backends().into_iter().cloned().collect()
    } else {
        args.backends.iter().enumerate().map(|(i, b)| parse_backend_flag(b, i as i64)).collect::<Result<_, _>>()?
    };
    if specs.is_empty() {
        return Err(Failure::user("no backends: pass --backend ID=URL or list [[backends]] in the config"));
    }
    let input = stage_path(args.input, config, "reports.jsonl");
    let reports: Vec<DonReport> = read_jsonl_file(&input)?;
    validate_reports(&reports)?;

    let backends: Vec<Box<dyn CompletionBackend>> = specs.iter().map(open_backend).collect::<Result<_, _>>()?;
    let refs: Vec<&dyn CompletionBackend> = backends.iter().map(|b| b.as_ref()).collect();
    let retry = RetryPolicy { base_delay: Duration::from_millis(args.retry_delay_ms), ..RetryPolicy::default() };
    let audit_file = match &args.audit {
        Some(path) => Some(Mutex::new(
            fs::File::create(path).map_err(|e| Failure::from(Error::io(path, e)))?,
        )),
        None => None,
    };
    let audit = audit_file.as_ref().map(|m| m as &Mutex<dyn std::io::Write + Send>);
    let records = extract_corpus(&reports, &refs, config.chunking, retry, usize::from(args.jobs), audit);

    let out = stage_path(args.out, config, "extractions.jsonl");
    write_file(&out, &write_jsonl(&records))?;
    let failed = records.iter().filter(|r| r.is_empty()).count();
    eprintln!("{} extractions ({} empty) -> {}", records.len(), failed, out.display());
    Ok(())
}

// ---------------------------------------------------------------------------

fn vote(config: &PipelineConfig, args: VoteArgs) -> Outcome {
    let input = stage_path(args.input, config, "extractions.jsonl");
    let records: Vec<ExtractionRecord> = read_jsonl_file(&input)?;
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    if !args.allow_any_count && !records.is_empty() && models.len() != 3 {
        return Err(Failure::user(format!(
            "voting needs exactly 3 backends, found {} ({}); pass --allow-any-count to vote anyway",
            models.len(),
            models.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let threshold = args.threshold.unwrap_or(config.similarity_threshold);
    if !(threshold > -1.0 && threshold < 1.0) {
        return Err(Failure::user(format!("threshold must lie in (-1, 1), got {threshold}")));
    }
    let (fused, dicts) = fuse(&records, &DefaultSynonyms::with_threshold(threshold), &config.ensemble(args.allow_any_count))?;
    let out = stage_path(args.out, config, "ensemble.jsonl");
    write_file(&out, &write_jsonl(&fused))?;
    if let Some(path) = &args.dictionaries {
        let as_value = |json: String| serde_json::from_str::<serde_json::Value>(&json).expect("valid json");
        let both = serde_json::json!({
            "disease": as_value(dicts.disease.to_json()),
            "country": as_value(dicts.country.to_json()),
        });
        write_file(path, &(serde_json::to_string_pretty(&both).expect("serializes") + "\n"))?;
    }
    eprintln!("{} fused records -> {}", fused.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------

/// Records from a published CSV, a JSON-lines stage file or a Turtle graph.
fn read_events(path: &Path) -> Result<Vec<OutbreakEvent>, Failure> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let read = || fs::read_to_string(path).map_err(|e| Failure::from(Error::io(path, e)));
    let events = match ext.as_str() {
        "jsonl" => read_jsonl_file(path)?,
        "csv" => parse_csv(&read()?)?,
        "ttl" => KgConfig::default().events_from_graph(&parse_turtle(&read()?, "eKG")?).into_values().collect(),
        _ => return Err(Failure::user(format!("{}: expected a .csv, .jsonl or .ttl file", path.display()))),
    };
    if let Some(i) = events.iter().position(|e: &OutbreakEvent| e.fileid.trim().is_empty()) {
        return Err(Error::InvalidRecord { id: format!("record {}", i + 1), message: "empty fileid".into() }.into());
    }
    Ok(events)
}

fn build_kg(config: &PipelineConfig, args: BuildKgArgs) -> Outcome {
    let input = stage_path(args.input, config, "ensemble.jsonl");
    let events = read_events(&input)?;
    let kg = KgConfig {
        base_iri: config.base_iri.clone(),
        superclass: format!("{}Surveillance_process", config.base_iri),
        first_seq: args.first_seq,
        ..KgConfig::default()
    };
    let artifacts = build_artifacts(&events, &kg)?;
    let dir = args.out.unwrap_or_else(|| config.output_dir.clone());
    write_artifacts(&artifacts, &dir)?;
    eprintln!(
        "{} records -> {} ({TURTLE_FILE}, {RDFXML_FILE}, {CSV_FILE})",
        events.len(),
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn serve(config: &PipelineConfig, args: ServeArgs) -> Outcome {
    let service = ServiceConfig {
        bind: args.bind,
        base_iri: config.base_iri.clone(),
        data: args.data,
        static_dir: args.static_dir,
        ..ServiceConfig::default()
    };
    service.validate().map_err(Failure::user)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.into()))?;
    runtime.block_on(ekg_service::serve(service)).map_err(|e| Failure::User(anyhow::anyhow!("{e}")))
}

// ---------------------------------------------------------------------------

fn eval(args: EvalArgs) -> Outcome {
    let predictions = read_events(&args.pred)?;
    let gold_text = fs::read_to_string(&args.gold).map_err(|e| Failure::from(Error::io(&args.gold, e)))?;
    let gold = parse_gold_csv(&gold_text)?;
    let named: Vec<OutbreakEvent> = predictions.iter().cloned().chain(parse_csv(&gold_text)?).collect();
    let dicts = DefaultSynonyms::default().dictionaries_for_events(&named);
    let report = evaluate_corpus(&predictions, &gold, &dicts)?;
    let text = match args.format {
        ReportFormat::Table => report.to_table(),
        ReportFormat::Json => report.to_json() + "\n",
    };
    emit(args.out.as_deref(), &text)?;
    if !report.unmatched_gold.is_empty() {
        eprintln!("{} gold reports had no prediction", report.unmatched_gold.len());
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------

fn read_reference_counts(path: &Path) -> Result<BTreeMap<i32, f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::from(Error::io(path, e)))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Failure::user(format!("{}: {e}", path.display())))?;
        let bad = || Failure::user(format!("{}: row {} must be year,count", path.display(), i + 2));
        let year: i32 = row.get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let count: f64 = row.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        out.insert(year, count);
    }
    Ok(out)
}

fn stats(args: StatsArgs) -> Outcome {
    let events = read_events(&args.input)?;
    let dicts = (!args.raw_labels).then(|| DefaultSynonyms::default().dictionaries_for_events(&events));
    let labels = Labeler::new(dicts.as_ref());

    if let (Some(disease), Some(country)) = (&args.disease, &args.country) {
        let disease = dicts.as_ref().map_or(disease.as_str(), |d| d.disease.canonicalize(disease));
        let country = dicts.as_ref().map_or(country.as_str(), |d| d.country.canonicalize(country));
        let series = time_series(&events, disease, country, labels);
        let yearly = yearly_aggregate(&series);
        let mut tables = Vec::new();
        if args.yearly || args.regress_against.is_some() {
            let mut t = Table::new(format!("{country} \u{2013} {disease}: cases per year"), &["year", "cases"]);
            for (y, c) in &yearly {
                t.push(vec![y.to_string(), c.to_string()]);
            }
            tables.push(t);
        } else {
            let mut t = Table::new(format!("{country} \u{2013} {disease}: cases"), &["date", "cases"]);
            for (d, c) in &series {
                t.push(vec![d.to_string(), c.to_string()]);
            }
            tables.push(t);
        }
        if let Some(path) = &args.regress_against {
            let reference = read_reference_counts(path)?;
            let (x, y): (Vec<f64>, Vec<f64>) = yearly
                .iter()
                .filter(|(year, _)| !args.exclude_year.contains(year))
                .filter_map(|(year, cases)| reference.get(year).map(|r| (*r, *cases as f64)))
                .unzip();
            let fit = ols_regression(&x, &y)?;
            let mut t = Table::new("regression of series totals on reference counts", &["statistic", "value"]);
            for (name, value) in [
                ("n", fit.n as f64),
                ("slope", fit.slope),
                ("intercept", fit.intercept),
                ("slope_se", fit.slope_se),
                ("ci95_low", fit.ci95_low),
                ("ci95_high", fit.ci95_high),
                ("t", fit.t_statistic),
                ("p_value", fit.p_value),
                ("r", fit.r),
            ] {
                t.push(vec![name.to_string(), format!("{value}")]);
            }
            tables.push(t);
        }
        print_tables(&tables, args.format);
        return Ok(());
    }

    let s = dataset_summary(&events, labels);
    let mut summary = Table::new("dataset", &["measure", "value"]);
    for (k, v) in [("entries", s.entries), ("unique_diseases", s.unique_diseases), ("unique_countries", s.unique_countries)] {
        summary.push(vec![k.to_string(), v.to_string()]);
    }
    let mut tables = vec![summary];
    for (key, title, column) in [
        (CountKey::Disease, "top diseases", "disease"),
        (CountKey::Country, "top countries", "country"),
        (CountKey::Pair, "top outbreaks", "country \u{2013} disease"),
    ] {
        let mut t = Table::new(title, &["rank", column, "records"]);
        for (i, (label, n)) in top_counts(&events, key, args.top, labels).into_iter().enumerate() {
            t.push(vec![(i + 1).to_string(), label, n.to_string()]);
        }
        tables.push(t);
    }
    print_tables(&tables, args.format);
    Ok(())
}

fn print_tables(tables: &[Table], format: TableFormat) {
    let rendered: Vec<String> = tables
        .iter()
        .map(|t| match format {
            TableFormat::Text => t.render(format),
            TableFormat::Csv => format!("# {}\n{}", t.title, t.render(format)),
        })
        .collect();
    print!("{}", rendered.join("\n"));
}

// ---------------------------------------------------------------------------

fn query(args: QueryArgs) -> Outcome {
    let text = match (&args.query, &args.file) {
        (Some(q), _) => q.clone(),
        (None, Some(f)) => fs::read_to_string(f).map_err(|e| Failure::from(Error::io(f, e)))?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let q = parse_query(&text)?;
    let data = fs::read_to_string(&args.data).map_err(|e| Failure::from(Error::io(&args.data, e)))?;
    let mut store = TripleStore::new();
    store.load_graph(args.graph.clone(), parse_turtle(&data, &args.graph)?);
    let format = match args.format {
        ResultKind::Json => ResultFormat::Json,
        ResultKind::Xml => ResultFormat::Xml,
        ResultKind::Csv => ResultFormat::Csv,
        ResultKind::Html => ResultFormat::Html,
    };
    print!("{}", serialize_results(&evaluate(&q, &store), format));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_flags() {
        let b = parse_backend_flag("llama=http://x/complete", 0).unwrap();
        assert_eq!((b.id.as_str(), b.url.as_str()), ("llama", "http://x/complete"));
        assert!(parse_backend_flag("=http://x", 0).is_err());
        assert!(parse_backend_flag("a=", 0).is_err());
    }

    #[test]
    fn duplicate_reports_are_rejected() {
        let r = DonReport::from_raw("a", "x");
        assert!(validate_reports(&[r.clone(), r]).is_err());
    }

    #[test]
    fn error_classes() {
        let user = Failure::from(Error::InvalidRecord { id: "x".into(), message: "bad".into() });
        assert!(matches!(user, Failure::User(_)));
        let missing = Error::io("nope", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert!(matches!(Failure::from(missing), Failure::User(_)));
        let disk = Error::io("out", std::io::Error::other("disk full"));
        assert!(matches!(Failure::from(disk), Failure::Internal(_)));
        assert!(matches!(Failure::from(Error::RdfXml("p".into())), Failure::Internal(_)));
    }
}
