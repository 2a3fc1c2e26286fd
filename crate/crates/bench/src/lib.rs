//! Seeded synthetic inputs shared by the benchmarks.

use chrono::NaiveDate;
use ekg_core::{ExtractionRecord, OutbreakEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DISEASES: [&str; 12] = [
    "Nipah Virus", "Nipah virus", "NiV", "Ebola", "Ebola virus disease", "EVD", "Cholera", "cholera",
    "MERS-CoV", "MERSCoV", "Zika", "Dengue fever",
];

pub const COUNTRIES: [&str; 10] = [
    "India", "Yemen", "Saudi Arabia", "Kingdom of Saudi Arabia", "Democratic Republic of the Congo",
    "DRC", "Italy", "Brazil", "Viet Nam", "Vietnam",
];

/// `n` records with repeated surface forms, dates across 2015-2020 and a
/// sprinkling of missing fields.
pub fn synthetic_events(n: usize, seed: u64) -> Vec<OutbreakEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let date = NaiveDate::from_ymd_opt(rng.gen_range(2015..=2020), rng.gen_range(1..=12), rng.gen_range(1..=28));
            OutbreakEvent {
                fileid: format!("report-{i:06}"),
                disease: Some(DISEASES[rng.gen_range(0..DISEASES.len())].to_string()),
                country: Some(COUNTRIES[rng.gen_range(0..COUNTRIES.len())].to_string()),
                date: date.filter(|_| rng.gen_bool(0.9)),
                imputed_date: date,
                cases: rng.gen_bool(0.85).then(|| rng.gen_range(0..5000)),
                deaths: rng.gen_bool(0.6).then(|| rng.gen_range(0..500)),
            }
        })
        .collect()
}

pub const MODELS: [&str; 3] = ["meta-llama-3-70b-instruct", "mistral-7b-openorca", "zephyr-7b-beta"];

/// Three backend answers per record, each field swapped for another
/// record's value one time in five.
pub fn synthetic_extractions(events: &[OutbreakEvent], seed: u64) -> Vec<ExtractionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(events.len() * MODELS.len());
    for e in events {
        for model in MODELS {
            let alt = &events[rng.gen_range(0..events.len())];
            let mut swap = || rng.gen_bool(0.2);
            out.push(ExtractionRecord {
                fileid: e.fileid.clone(),
                model_id: model.to_string(),
                disease: if swap() { alt.disease.clone() } else { e.disease.clone() },
                country: if swap() { alt.country.clone() } else { e.country.clone() },
                date: if swap() { alt.date } else { e.date },
                cases: if swap() { alt.cases } else { e.cases },
                deaths: if swap() { alt.deaths } else { e.deaths },
                status: Default::default(),
            });
        }
    }
    out
}
