use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

const BACKENDS: [&str; 3] = ["meta-llama-3-70b-instruct", "mistral-7b-openorca", "zephyr-7b-beta"];

const NIPAH_QUERY: &str = "\
PREFIX eKG: <http://data.jrc.ec.europa.eu/dataset/89056048-7f5d-4d7c-96ad-f99d1c0f6601/>
SELECT ?record ?cases WHERE {
  ?record eKG:virus_extracted \"Nipah Virus\" .
  ?record eKG:cases_extracted ?cases .
}";

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn ekg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ekg"))
        .args(args)
        .env_remove("EKG_CONFIG")
        .env_remove("EKG_DATA")
        .env_remove("EKG_BIND")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ekg(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs ingest, extract, vote and build-kg on the mock corpus into `dir`.
fn run_pipeline(dir: &Path) {
    let reports = dir.join("reports.jsonl");
    let extractions = dir.join("extractions.jsonl");
    let ensemble = dir.join("ensemble.jsonl");
    ok(&["ingest", "--corpus", s(&fixture("mock/reports")), "--out", s(&reports)]);
    let flags: Vec<String> = BACKENDS
        .iter()
        .map(|id| format!("{id}=mock:{}", fixture(&format!("mock/backends/{id}.json")).display()))
        .collect();
    let mut args = vec!["extract", "--in", s(&reports), "--out", s(&extractions), "--jobs", "2", "--retry-delay-ms", "0"];
    for f in &flags {
        args.extend(["--backend", f.as_str()]);
    }
    ok(&args);
    ok(&["vote", "--in", s(&extractions), "--out", s(&ensemble)]);
    ok(&["build-kg", "--in", s(&ensemble), "--out", s(dir)]);
}

#[test]
fn staged_pipeline_reproduces_the_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    for name in ["ensemble.jsonl", "epidemicIE.csv", "epidemicIE.ttl", "epidemicIE.rdf"] {
        let got = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let want = std::fs::read_to_string(fixture(&format!("golden/{name}"))).unwrap();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn config_file_drives_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let mut toml = format!("corpus = {:?}\noutput_dir = \"build\"\n", s(&fixture("mock/reports")));
    for (i, id) in BACKENDS.iter().enumerate() {
        let script = fixture(&format!("mock/backends/{id}.json"));
        toml += &format!("\n[[backends]]\nid = {id:?}\nurl = \"mock:{}\"\npriority = {i}\n", script.display());
    }
    let config = dir.path().join("ekg.toml");
    std::fs::write(&config, toml).unwrap();
    let c = s(&config);
    for stage in ["ingest", "extract", "vote", "build-kg"] {
        ok(&["--config", c, stage]);
    }
    let csv = std::fs::read_to_string(dir.path().join("build/epidemicIE.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(fixture("golden/epidemicIE.csv")).unwrap());
}

#[test]
fn query_and_stats_read_the_built_graph() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    let ttl = dir.path().join("epidemicIE.ttl");
    let out = ok(&["query", "--data", s(&ttl), NIPAH_QUERY]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines, ["record,cases", &format!("{}don-record2,15", ekg_ns())]);

    let json = ok(&["query", "--data", s(&ttl), "--format", "json", NIPAH_QUERY]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["results"]["bindings"].as_array().unwrap().len(), 1);

    let stats = ok(&["stats", "--in", s(&ttl)]);
    assert!(stats.contains("entries"), "{stats}");
    assert!(stats.contains("India \u{2013} Nipah Virus"), "{stats}");
    let csv = ok(&["stats", "--in", s(&dir.path().join("epidemicIE.csv")), "--format", "csv", "--top", "1"]);
    assert!(csv.contains("# top diseases\nrank,disease,records\n1,"), "{csv}");
}

fn ekg_ns() -> &'static str {
    "http://data.jrc.ec.europa.eu/dataset/89056048-7f5d-4d7c-96ad-f99d1c0f6601/"
}

#[test]
fn eval_prints_metrics() {
    let pred = fixture("eval/predictions.csv");
    let gold = fixture("eval/gold.csv");
    let table = ok(&["eval", "--pred", s(&pred), "--gold", s(&gold)]);
    assert!(table.to_lowercase().contains("f1"), "{table}");
    let json = ok(&["eval", "--pred", s(&pred), "--gold", s(&gold), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v.is_object());
}

#[test]
fn stats_regression_against_reference_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let mut csv = String::from("fileid,virus_extracted,country_extracted,date_extracted,date_cases_Imputed,cases_extracted,deaths_extracted\n");
    let mut reference = String::from("year,cases\n");
    for (i, year) in (2013..=2019).enumerate() {
        let cases = 10 * (i + 1) + 5;
        csv += &format!("r{year},MERS,Saudi Arabia,{year}/03/01,,{cases},\n");
        reference += &format!("{year},{}\n", 5 * (i + 1));
    }
    std::fs::write(&data, csv).unwrap();
    let who = dir.path().join("who.csv");
    std::fs::write(&who, reference).unwrap();
    let out = ok(&[
        "stats", "--in", s(&data), "--disease", "MERS", "--country", "Saudi Arabia", "--regress-against", s(&who),
        "--format", "csv",
    ]);
    assert!(out.contains("\nslope,2\n"), "{out}");
    assert!(out.contains("\nintercept,5\n"), "{out}");
    assert!(out.contains("\nn,7\n"), "{out}");
}

#[test]
fn exit_codes() {
    assert_eq!(ekg(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(ekg(&["--help"]).status.code(), Some(0));

    let missing = ekg(&["build-kg", "--in", "/nonexistent/ensemble.jsonl", "--out", "/tmp"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{not json}\n").unwrap();
    assert_eq!(ekg(&["vote", "--in", s(&bad)]).status.code(), Some(1));

    // Two backends only: voting refuses unless asked.
    let reports = dir.path().join("reports.jsonl");
    let extractions = dir.path().join("x.jsonl");
    ok(&["ingest", "--corpus", s(&fixture("mock/reports")), "--out", s(&reports)]);
    let mut args = vec!["extract".to_string(), "--in".into(), s(&reports).into(), "--out".into(), s(&extractions).into()];
    for id in &BACKENDS[..2] {
        args.push("--backend".into());
        args.push(format!("{id}=mock:{}", fixture(&format!("mock/backends/{id}.json")).display()));
    }
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let out = dir.path().join("e.jsonl");
    let refused = ekg(&["vote", "--in", s(&extractions), "--out", s(&out)]);
    assert_eq!(refused.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("exactly 3"));
    ok(&["vote", "--in", s(&extractions), "--out", s(&out), "--allow-any-count"]);
    assert!(out.exists());

    assert_eq!(ekg(&["extract", "--in", s(&reports)]).status.code(), Some(1), "no backends");
    assert_eq!(ekg(&["query", "--data", s(&reports), "SELECT * WHERE {"]).status.code(), Some(1));
    assert_eq!(ekg(&["stats", "--in", s(&reports), "--disease", "x"]).status.code(), Some(1), "needs --country");
}

#[test]
fn serve_answers_sparql_over_http() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    let mut child = Command::new(env!("CARGO_BIN_EXE_ekg"))
        .args(["serve", "--data", s(&dir.path().join("epidemicIE.ttl")), "--bind", "127.0.0.1:0"])
        .env("RUST_LOG", "info")
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut addr = None;
    let mut line = String::new();
    while stderr.read_line(&mut line).unwrap() > 0 {
        if let Some(rest) = line.split("listening on http://").nth(1) {
            addr = Some(rest.trim().to_string());
            break;
        }
        line.clear();
    }
    let result = addr.ok_or("server never reported its address").map(|addr| {
        let body: String = form_encode(NIPAH_QUERY);
        let mut stream = TcpStream::connect(&addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        write!(
            stream,
            "POST /sparql HTTP/1.1\r\nHost: {addr}\r\nAccept: text/csv\r\nContent-Type: application/x-www-form-urlencoded\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).unwrap();
        response
    });
    child.kill().ok();
    child.wait().ok();
    let response = result.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let body = response.split("\r\n\r\n").nth(1).unwrap();
    let rows: Vec<&str> = body.lines().collect();
    assert_eq!(rows, ["record,cases", &format!("{}don-record2,15", ekg_ns())]);
}

fn form_encode(q: &str) -> String {
    let mut out = String::from("query=");
    for b in q.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out += &format!("%{b:02X}"),
        }
    }
    out
}
