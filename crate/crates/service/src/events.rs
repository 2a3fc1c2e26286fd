//! Read-only view of a loaded graph: the triple store plus the outbreak
//! records it contains, grouped under canonical synonym clusters.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use ekg_core::kg::parse_turtle;
use ekg_core::pipeline::DefaultSynonyms;
use ekg_core::{Graph, KgConfig, OutbreakEvent, SynonymDictionaries, TripleStore};
use serde::Serialize;

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;

pub struct Snapshot {
    pub store: TripleStore,
    pub kg: KgConfig,
    events: Vec<(usize, OutbreakEvent)>,
    dicts: SynonymDictionaries,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub disease: Option<String>,
    pub country: Option<String>,
    pub year: Option<i32>,
    pub page: usize,
    pub page_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EventItem {
    pub id: String,
    pub disease: Option<String>,
    pub country: Option<String>,
    pub date: Option<NaiveDate>,
    pub imputed_date: Option<NaiveDate>,
    pub cases: Option<u64>,
    pub deaths: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EventPage {
    pub total: usize,
    pub items: Vec<EventItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FacetValue<T> {
    pub value: T,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Facets {
    pub total: usize,
    pub diseases: Vec<FacetValue<String>>,
    pub countries: Vec<FacetValue<String>>,
    pub years: Vec<FacetValue<i32>>,
}

impl Snapshot {
    pub fn empty(kg: KgConfig) -> Self {
        Snapshot::from_graph(Graph::new(kg.graph_name.clone()), kg)
    }

    pub fn from_graph(graph: Graph, kg: KgConfig) -> Self {
        let events: Vec<(usize, OutbreakEvent)> = kg.events_from_graph(&graph).into_iter().collect();
        let plain: Vec<OutbreakEvent> = events.iter().map(|(_, e)| e.clone()).collect();
        let dicts = DefaultSynonyms::default().dictionaries_for_events(&plain);
        let mut store = TripleStore::new();
        store.load_graph(kg.graph_name.clone(), graph);
        Snapshot { store, kg, events, dicts }
    }

    pub fn load(path: &Path, kg: KgConfig) -> ekg_core::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ekg_core::Error::io(path, e))?;
        Ok(Snapshot::from_graph(parse_turtle(&text, &kg.graph_name)?, kg))
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    fn canonical_disease<'a>(&'a self, term: &'a str) -> &'a str {
        self.dicts.disease.canonicalize(term)
    }

    fn canonical_country<'a>(&'a self, term: &'a str) -> &'a str {
        self.dicts.country.canonicalize(term)
    }

    fn matches(&self, e: &OutbreakEvent, f: &EventFilter) -> bool {
        let disease_ok = f.disease.as_deref().map_or(true, |want| {
            e.disease.as_deref().is_some_and(|d| self.canonical_disease(d) == self.canonical_disease(want))
        });
        let country_ok = f.country.as_deref().map_or(true, |want| {
            e.country.as_deref().is_some_and(|c| self.canonical_country(c) == self.canonical_country(want))
        });
        let year_ok = f.year.map_or(true, |y| e.date.is_some_and(|d| d.year() == y));
        disease_ok && country_ok && year_ok
    }

    /// Matching records in sequence order, one page at a time. Labels are
    /// reported in canonical form.
    pub fn events(&self, f: &EventFilter) -> EventPage {
        let matching: Vec<&(usize, OutbreakEvent)> = self.events.iter().filter(|(_, e)| self.matches(e, f)).collect();
        let start = (f.page.max(1) - 1).saturating_mul(f.page_size);
        let items = matching
            .iter()
            .skip(start)
            .take(f.page_size)
            .map(|(seq, e)| EventItem {
                id: self.kg.record_iri(*seq).into_string(),
                disease: e.disease.as_deref().map(|d| self.canonical_disease(d).to_string()),
                country: e.country.as_deref().map(|c| self.canonical_country(c).to_string()),
                date: e.date,
                imputed_date: e.imputed_date,
                cases: e.cases,
                deaths: e.deaths,
            })
            .collect();
        EventPage { total: matching.len(), items }
    }

    /// Record counts per canonical disease, canonical country and year of
    /// the extracted date; most frequent first.
    pub fn facets(&self) -> Facets {
        let mut diseases: BTreeMap<String, usize> = BTreeMap::new();
        let mut countries: BTreeMap<String, usize> = BTreeMap::new();
        let mut years: BTreeMap<i32, usize> = BTreeMap::new();
        for (_, e) in &self.events {
            if let Some(d) = &e.disease {
                *diseases.entry(self.canonical_disease(d).to_string()).or_default() += 1;
            }
            if let Some(c) = &e.country {
                *countries.entry(self.canonical_country(c).to_string()).or_default() += 1;
            }
            if let Some(date) = e.date {
                *years.entry(date.year()).or_default() += 1;
            }
        }
        Facets {
            total: self.events.len(),
            diseases: ranked(diseases),
            countries: ranked(countries),
            years: ranked(years),
        }
    }

    /// Surface forms sharing a cluster with `term`, including `term` itself.
    pub fn disease_variants(&self, term: &str) -> Vec<String> {
        variants(&self.dicts.disease, term)
    }

    pub fn country_variants(&self, term: &str) -> Vec<String> {
        variants(&self.dicts.country, term)
    }
}

fn variants(dict: &ekg_core::ensemble::SynonymDictionary, term: &str) -> Vec<String> {
    match dict.cluster_of(term) {
        Some(c) => dict.clusters()[c].clone(),
        None => vec![term.to_string()],
    }
}

fn ranked<T: Ord>(counts: BTreeMap<T, usize>) -> Vec<FacetValue<T>> {
    let mut out: Vec<FacetValue<T>> = counts.into_iter().map(|(value, count)| FacetValue { value, count }).collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    out
}
