//! Per-field majority voting across backends.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dictionary::SynonymDictionary;
use crate::corpus::parse_slug;
use crate::error::{Error, Result};
use crate::event::OutbreakEvent;
use crate::extract::ExtractionRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WinRule {
    /// Every backend gave the same answer.
    Unanimous,
    /// One value had strictly more votes than any other.
    Plurality,
    /// Several values tied; the highest-priority backend's present value won.
    PriorityTieBreak,
}

/// Votes cast for one field, in backend priority order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vote<K> {
    pub winner: Option<K>,
    pub tally: Vec<(Option<K>, usize)>,
    pub rule: WinRule,
}

/// Plurality vote where `values` are ordered by backend priority.
///
/// Absence is a vote of its own. On a tie for the top count a present value
/// beats absence, and among present values the earliest backend wins.
pub fn majority_vote<K: Clone + PartialEq>(values: &[Option<K>]) -> Vote<K> {
    let mut tally: Vec<(Option<K>, usize)> = Vec::new();
    for v in values {
        match tally.iter_mut().find(|(k, _)| k == v) {
            Some((_, n)) => *n += 1,
            None => tally.push((v.clone(), 1)),
        }
    }
    let Some(top) = tally.iter().map(|(_, n)| *n).max() else {
        return Vote {
            winner: None,
            tally,
            rule: WinRule::Unanimous,
        };
    };
    let leaders: Vec<&(Option<K>, usize)> = tally.iter().filter(|(_, n)| *n == top).collect();
    let (winner, rule) = if tally.len() == 1 {
        (tally[0].0.clone(), WinRule::Unanimous)
    } else if leaders.len() == 1 {
        (leaders[0].0.clone(), WinRule::Plurality)
    } else {
        let pick = leaders
            .iter()
            .find(|(k, _)| k.is_some())
            .unwrap_or(&leaders[0]);
        (pick.0.clone(), WinRule::PriorityTieBreak)
    };
    Vote {
        winner,
        tally,
        rule,
    }
}

pub fn majority_vote_numeric(values: &[Option<u64>]) -> Option<u64> {
    majority_vote(values).winner
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum TextKey {
    Cluster(usize),
    Unseen(String),
}

fn text_vote(values: &[Option<String>], dict: &SynonymDictionary) -> Vote<String> {
    let keys: Vec<Option<TextKey>> = values
        .iter()
        .map(|v| {
            v.as_ref().map(|s| match dict.cluster_of(s) {
                Some(c) => TextKey::Cluster(c),
                None => TextKey::Unseen(s.clone()),
            })
        })
        .collect();
    let label = |k: &TextKey| match k {
        TextKey::Cluster(c) => dict.canonical(*c).to_string(),
        TextKey::Unseen(s) => s.clone(),
    };
    let vote = majority_vote(&keys);
    Vote {
        winner: vote.winner.as_ref().map(label),
        tally: vote
            .tally
            .iter()
            .map(|(k, n)| (k.as_ref().map(label), *n))
            .collect(),
        rule: vote.rule,
    }
}

/// Votes by synonym cluster and returns the winning cluster's canonical form.
///
/// Values the dictionary has never seen form singleton clusters of their own.
pub fn majority_vote_text(values: &[Option<String>], dict: &SynonymDictionary) -> Option<String> {
    text_vote(values, dict).winner
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyEntry {
    pub value: Option<String>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldProvenance {
    pub tally: Vec<TallyEntry>,
    pub rule: WinRule,
}

impl<K: ToString> From<Vote<K>> for FieldProvenance {
    fn from(vote: Vote<K>) -> Self {
        FieldProvenance {
            tally: vote
                .tally
                .into_iter()
                .map(|(value, count)| TallyEntry {
                    value: value.map(|v| v.to_string()),
                    count,
                })
                .collect(),
            rule: vote.rule,
        }
    }
}

/// Fused record plus the vote tallies behind each field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    #[serde(flatten)]
    pub event: OutbreakEvent,
    #[serde(default)]
    pub provenance: BTreeMap<String, FieldProvenance>,
}

/// Dictionaries for the two text fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynonymDictionaries {
    pub disease: SynonymDictionary,
    pub country: SynonymDictionary,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleConfig {
    /// Backend ids, highest priority first; unknown ids rank after these.
    pub priority: Vec<String>,
    /// Required number of records per report, `None` for any count.
    pub expected_records: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            priority: vec![
                "meta-llama-3-70b-instruct".into(),
                "mistral-7b-openorca".into(),
                "zephyr-7b-beta".into(),
            ],
            expected_records: Some(3),
        }
    }
}

impl EnsembleConfig {
    fn rank(&self, model_id: &str) -> usize {
        self.priority
            .iter()
            .position(|p| p.eq_ignore_ascii_case(model_id))
            .unwrap_or(self.priority.len())
    }
}

/// Fuses the per-backend records of one report.
pub fn ensemble_record(
    records: &[ExtractionRecord],
    dicts: &SynonymDictionaries,
    cfg: &EnsembleConfig,
) -> Result<EnsembleRecord> {
    let first = records.first().ok_or_else(|| Error::VoteArity {
        fileid: String::new(),
        expected: cfg.expected_records.unwrap_or(1),
        found: 0,
    })?;
    if let Some(found) = records.iter().find(|r| r.fileid != first.fileid) {
        return Err(Error::FileIdMismatch {
            expected: first.fileid.clone(),
            found: found.fileid.clone(),
        });
    }
    if let Some(expected) = cfg.expected_records {
        if records.len() != expected {
            return Err(Error::VoteArity {
                fileid: first.fileid.clone(),
                expected,
                found: records.len(),
            });
        }
    }

    let mut ordered: Vec<&ExtractionRecord> = records.iter().collect();
    ordered.sort_by_key(|r| cfg.rank(&r.model_id));

    let disease = text_vote(&collect(&ordered, |r| r.disease.clone()), &dicts.disease);
    let country = text_vote(&collect(&ordered, |r| r.country.clone()), &dicts.country);
    let date = majority_vote(&collect(&ordered, |r| r.date));
    let cases = majority_vote(&collect(&ordered, |r| r.cases));
    let deaths = majority_vote(&collect(&ordered, |r| r.deaths));

    let event = OutbreakEvent {
        fileid: first.fileid.clone(),
        disease: disease.winner.clone(),
        country: country.winner.clone(),
        date: date.winner,
        imputed_date: parse_slug(&first.fileid),
        cases: cases.winner,
        deaths: deaths.winner,
    };
    let provenance = BTreeMap::from([
        ("disease".to_string(), disease.into()),
        ("country".to_string(), country.into()),
        ("date".to_string(), date.into()),
        ("cases".to_string(), cases.into()),
        ("deaths".to_string(), deaths.into()),
    ]);
    Ok(EnsembleRecord { event, provenance })
}

fn collect<T>(records: &[&ExtractionRecord], field: impl Fn(&ExtractionRecord) -> T) -> Vec<T> {
    records.iter().map(|r| field(r)).collect()
}

/// Groups records by fileid (first-appearance order) and fuses each group.
pub fn vote_corpus(
    records: &[ExtractionRecord],
    dicts: &SynonymDictionaries,
    cfg: &EnsembleConfig,
) -> Result<Vec<EnsembleRecord>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<ExtractionRecord>> = BTreeMap::new();
    for r in records {
        let group = groups.entry(&r.fileid).or_insert_with(|| {
            order.push(&r.fileid);
            Vec::new()
        });
        group.push(r.clone());
    }
    order
        .into_iter()
        .map(|fileid| ensemble_record(&groups[fileid], dicts, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::similarity::FieldKind;
    use chrono::NaiveDate;

    fn dict(kind: FieldKind, terms: &[&str], related: impl Fn(&str, &str) -> bool) -> SynonymDictionary {
        let terms: Vec<String> = terms.iter().map(|s| s.to_string()).collect();
        SynonymDictionary::from_relation(&terms, kind, related)
    }

    fn some(xs: &[&str]) -> Vec<Option<String>> {
        xs.iter().map(|s| Some(s.to_string())).collect()
    }

    #[test]
    fn numeric_votes() {
        assert_eq!(majority_vote_numeric(&[Some(15), Some(17), Some(15)]), Some(15));
        assert_eq!(majority_vote_numeric(&[None, None, None]), None);
        assert_eq!(majority_vote_numeric(&[Some(10), Some(20), Some(30)]), Some(10));
        assert_eq!(majority_vote_numeric(&[None, Some(20), Some(30)]), Some(20));
        assert_eq!(majority_vote_numeric(&[None, None, Some(30)]), None);
        assert_eq!(majority_vote(&[Some(1), Some(1), Some(1)]).rule, WinRule::Unanimous);
        assert_eq!(majority_vote::<u64>(&[]).winner, None);
    }

    #[test]
    fn text_votes_by_cluster() {
        let d = dict(
            FieldKind::Disease,
            &["MERS-CoV", "Middle East respiratory syndrome", "Dengue"],
            |a, b| a.starts_with('M') && b.starts_with('M'),
        );
        let winner = majority_vote_text(
            &some(&["MERS-CoV", "Middle East respiratory syndrome", "Dengue"]),
            &d,
        );
        assert_eq!(winner.as_deref(), Some(d.canonicalize("MERS-CoV")));
        assert_eq!(majority_vote_text(&some(&["x", "x", "x"]), &d).as_deref(), Some("x"));
        assert_eq!(majority_vote_text(&some(&["a", "b", "c"]), &d).as_deref(), Some("a"));
    }

    fn record(model: &str, disease: &str, country: &str) -> ExtractionRecord {
        ExtractionRecord {
            disease: Some(disease.into()),
            country: Some(country.into()),
            date: NaiveDate::from_ymd_opt(2018, 5, 19),
            cases: Some(15),
            deaths: Some(13),
            ..ExtractionRecord::empty("31-may-2018-nipah-virus-india-en", model)
        }
    }

    fn dicts_for(records: &[ExtractionRecord]) -> SynonymDictionaries {
        let d: Vec<String> = records.iter().filter_map(|r| r.disease.clone()).collect();
        let c: Vec<String> = records.iter().filter_map(|r| r.country.clone()).collect();
        SynonymDictionaries {
            disease: SynonymDictionary::from_relation(&d, FieldKind::Disease, super::super::syntactic_equivalent),
            country: SynonymDictionary::from_relation(&c, FieldKind::Country, super::super::syntactic_equivalent),
        }
    }

    #[test]
    fn nipah_agreement() {
        let records = vec![
            record("meta-llama-3-70b-instruct", "Nipah virus", "India"),
            record("mistral-7b-openorca", "Nipah virus", "India"),
            record("zephyr-7b-beta", "Nipah virus", "India"),
        ];
        let fused = ensemble_record(&records, &dicts_for(&records), &EnsembleConfig::default()).unwrap();
        let e = &fused.event;
        assert_eq!(e.disease.as_deref(), Some("Nipah virus"));
        assert_eq!(e.country.as_deref(), Some("India"));
        assert_eq!(e.date, NaiveDate::from_ymd_opt(2018, 5, 19));
        assert_eq!(e.imputed_date, NaiveDate::from_ymd_opt(2018, 5, 31));
        assert_eq!((e.cases, e.deaths), (Some(15), Some(13)));
        assert_eq!(fused.provenance["cases"].rule, WinRule::Unanimous);
    }

    #[test]
    fn dissenting_synonym_counts_for_the_cluster() {
        let records = vec![
            record("meta-llama-3-70b-instruct", "x", "Trinidad & Tobago"),
            record("mistral-7b-openorca", "x", "Trinidad and Tobago"),
            record("zephyr-7b-beta", "x", "Trinidad and Tobago"),
        ];
        let fused = ensemble_record(&records, &dicts_for(&records), &EnsembleConfig::default()).unwrap();
        assert_eq!(fused.event.country.as_deref(), Some("Trinidad and Tobago"));
        let tally = &fused.provenance["country"].tally;
        assert_eq!(tally.len(), 1);
        assert_eq!(tally[0].count, 3);
    }

    #[test]
    fn all_absent_and_errors() {
        let empty: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|m| ExtractionRecord::empty("cholera-yemen", m))
            .collect();
        let fused = ensemble_record(&empty, &dicts_for(&empty), &EnsembleConfig::default()).unwrap();
        assert_eq!(fused.event, OutbreakEvent::new("cholera-yemen"));

        let mut mixed = empty.clone();
        mixed[2].fileid = "other".into();
        assert!(matches!(
            ensemble_record(&mixed, &dicts_for(&mixed), &EnsembleConfig::default()),
            Err(Error::FileIdMismatch { .. })
        ));
        assert!(matches!(
            ensemble_record(&empty[..2], &dicts_for(&empty), &EnsembleConfig::default()),
            Err(Error::VoteArity { .. })
        ));
        let any = EnsembleConfig {
            expected_records: None,
            ..Default::default()
        };
        assert!(ensemble_record(&empty[..2], &dicts_for(&empty), &any).is_ok());
    }

    #[test]
    fn priority_order_breaks_ties() {
        let mut records = vec![
            record("zephyr-7b-beta", "x", "c"),
            record("mistral-7b-openorca", "x", "b"),
            record("meta-llama-3-70b-instruct", "x", "a"),
        ];
        records[0].cases = Some(30);
        records[1].cases = Some(20);
        records[2].cases = Some(10);
        let fused = ensemble_record(&records, &dicts_for(&records), &EnsembleConfig::default()).unwrap();
        assert_eq!(fused.event.cases, Some(10));
        assert_eq!(fused.event.country.as_deref(), Some("a"));
        assert_eq!(fused.provenance["cases"].rule, WinRule::PriorityTieBreak);
    }

    #[test]
    fn corpus_grouping_keeps_order() {
        let mut records = Vec::new();
        for id in ["b-report", "a-report"] {
            for m in ["m1", "m2", "m3"] {
                records.push(ExtractionRecord::empty(id, m));
            }
        }
        let fused = vote_corpus(&records, &dicts_for(&records), &EnsembleConfig::default()).unwrap();
        let ids: Vec<_> = fused.iter().map(|r| r.event.fileid.as_str()).collect();
        assert_eq!(ids, ["b-report", "a-report"]);
    }
}
