//! Per-field scoring of extractions against a gold standard.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ensemble::{syntactic_equivalent, SynonymDictionaries, SynonymDictionary};
use crate::error::{Error, Result};
use crate::event::OutbreakEvent;
use crate::kg::parse_csv;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Disease,
    Country,
    Date,
    Cases,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Disease, Task::Country, Task::Date, Task::Cases];
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Disease => "disease",
            Task::Country => "country",
            Task::Date => "date",
            Task::Cases => "cases",
        })
    }
}

/// Gold annotation for one report; `None` is the negative class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub fileid: String,
    pub disease: Option<String>,
    pub country: Option<String>,
    pub date: Option<NaiveDate>,
    pub cases: Option<u64>,
}

impl From<OutbreakEvent> for GoldRecord {
    fn from(e: OutbreakEvent) -> Self {
        GoldRecord {
            fileid: e.fileid,
            disease: e.disease,
            country: e.country,
            date: e.date,
            cases: e.cases,
        }
    }
}

/// Reads gold rows from the dataset CSV layout; a deaths column is ignored.
pub fn parse_gold_csv(text: &str) -> Result<Vec<GoldRecord>> {
    Ok(parse_csv(text)?.into_iter().map(GoldRecord::from).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
    /// A present prediction that disagrees with a present gold value.
    FalsePositiveAndNegative,
}

/// Binary-classification outcome of one prediction against one gold value.
pub fn classify_pair<T: ?Sized>(pred: Option<&T>, gold: Option<&T>, matches: impl Fn(&T, &T) -> bool) -> Outcome {
    match (pred, gold) {
        (None, None) => Outcome::TrueNegative,
        (Some(_), None) => Outcome::FalsePositive,
        (None, Some(_)) => Outcome::FalseNegative,
        (Some(p), Some(g)) if matches(p, g) => Outcome::TruePositive,
        (Some(_), Some(_)) => Outcome::FalsePositiveAndNegative,
    }
}

/// Text match: same synonym cluster, or syntactically equal when either
/// term is missing from the dictionary.
pub fn text_matches(dict: &SynonymDictionary, pred: &str, gold: &str) -> bool {
    match (dict.cluster_of(pred), dict.cluster_of(gold)) {
        (Some(a), Some(b)) => a == b,
        _ => syntactic_equivalent(pred, gold),
    }
}

pub fn classify_field(task: Task, pred: &OutbreakEvent, gold: &GoldRecord, dicts: &SynonymDictionaries) -> Outcome {
    match task {
        Task::Disease => classify_pair(pred.disease.as_deref(), gold.disease.as_deref(), |p, g| {
            text_matches(&dicts.disease, p, g)
        }),
        Task::Country => classify_pair(pred.country.as_deref(), gold.country.as_deref(), |p, g| {
            text_matches(&dicts.country, p, g)
        }),
        Task::Date => classify_pair(pred.date.as_ref(), gold.date.as_ref(), |p, g| p == g),
        Task::Cases => classify_pair(pred.cases.as_ref(), gold.cases.as_ref(), |p, g| p == g),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::TruePositive => self.tp += 1,
            Outcome::FalsePositive => self.fp += 1,
            Outcome::FalseNegative => self.fn_ += 1,
            Outcome::TrueNegative => self.tn += 1,
            Outcome::FalsePositiveAndNegative => {
                self.fp += 1;
                self.fn_ += 1;
            }
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// TP / (TP + FP), 0 when undefined.
pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.tp as f64, (c.tp + c.fp) as f64)
}

/// TP / (TP + FN), 0 when undefined.
pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.tp as f64, (c.tp + c.fn_) as f64)
}

/// TP / (TP + (FP + FN) / 2), 0 when undefined.
pub fn f1(c: &ConfusionCounts) -> f64 {
    ratio(c.tp as f64, c.tp as f64 + (c.fp + c.fn_) as f64 / 2.0)
}

/// 2PR / (P + R), 0 when P + R = 0.
pub fn f1_harmonic(c: &ConfusionCounts) -> f64 {
    let (p, r) = (precision(c), recall(c));
    ratio(2.0 * p * r, p + r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<ConfusionCounts> for TaskMetrics {
    fn from(counts: ConfusionCounts) -> Self {
        TaskMetrics {
            counts,
            precision: precision(&counts),
            recall: recall(&counts),
            f1: f1(&counts),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tasks: BTreeMap<Task, TaskMetrics>,
    /// Gold reports with no prediction, scored as all-absent predictions.
    pub unmatched_gold: Vec<String>,
    /// Predictions with no gold report, left out of the scores.
    pub ignored_predictions: Vec<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, one row per task.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
            "task", "tp", "fp", "fn", "tn", "precision", "recall", "f1"
        );
        for (task, m) in &self.tasks {
            let c = m.counts;
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                task.to_string(),
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                m.precision,
                m.recall,
                m.f1
            );
        }
        out
    }
}

/// Scores predictions against gold records matched by fileid.
pub fn evaluate_corpus(
    predictions: &[OutbreakEvent],
    gold: &[GoldRecord],
    dicts: &SynonymDictionaries,
) -> Result<MetricsReport> {
    let mut by_id: HashMap<&str, &OutbreakEvent> = HashMap::new();
    for p in predictions {
        if by_id.insert(p.fileid.as_str(), p).is_some() {
            return Err(Error::DuplicateFileId(p.fileid.clone()));
        }
    }
    let mut seen_gold = HashSet::new();
    for g in gold {
        if !seen_gold.insert(g.fileid.as_str()) {
            return Err(Error::DuplicateFileId(g.fileid.clone()));
        }
    }

    let mut counts: BTreeMap<Task, ConfusionCounts> = Task::ALL.iter().map(|&t| (t, ConfusionCounts::default())).collect();
    let mut unmatched_gold = Vec::new();
    for g in gold {
        let absent;
        let pred = match by_id.get(g.fileid.as_str()) {
            Some(p) => *p,
            None => {
                unmatched_gold.push(g.fileid.clone());
                absent = OutbreakEvent::new(g.fileid.clone());
                &absent
            }
        };
        for task in Task::ALL {
            counts.get_mut(&task).expect("all tasks present").record(classify_field(task, pred, g, dicts));
        }
    }
    let ignored_predictions: Vec<String> = predictions
        .iter()
        .filter(|p| !seen_gold.contains(p.fileid.as_str()))
        .map(|p| p.fileid.clone())
        .collect();
    if !ignored_predictions.is_empty() {
        log::warn!("{} predictions have no gold record and were not scored", ignored_predictions.len());
    }
    Ok(MetricsReport {
        tasks: counts.into_iter().map(|(t, c)| (t, c.into())).collect(),
        unmatched_gold,
        ignored_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::FieldKind;

    fn dicts() -> SynonymDictionaries {
        let disease = SynonymDictionary::from_relation(
            &["MERS-CoV".to_string(), "Middle East respiratory syndrome".to_string()],
            FieldKind::Disease,
            |_, _| true,
        );
        let country = SynonymDictionary::from_relation(&[], FieldKind::Country, |_, _| false);
        SynonymDictionaries { disease, country }
    }

    #[test]
    fn rule_table() {
        let same = |a: &u64, b: &u64| a == b;
        assert_eq!(classify_pair::<u64>(None, None, same), Outcome::TrueNegative);
        assert_eq!(classify_pair(Some(&1), None, same), Outcome::FalsePositive);
        assert_eq!(classify_pair(None, Some(&1), same), Outcome::FalseNegative);
        assert_eq!(classify_pair(Some(&15), Some(&15), same), Outcome::TruePositive);
        assert_eq!(classify_pair(Some(&17), Some(&15), same), Outcome::FalsePositiveAndNegative);
    }

    #[test]
    fn synonym_pair_is_a_hit() {
        let d = dicts();
        let mut pred = OutbreakEvent::new("r");
        pred.disease = Some("MERS-CoV".into());
        let gold = GoldRecord {
            fileid: "r".into(),
            disease: Some("Middle East respiratory syndrome".into()),
            ..Default::default()
        };
        assert_eq!(classify_field(Task::Disease, &pred, &gold, &d), Outcome::TruePositive);
    }

    #[test]
    fn metric_forms() {
        let c = ConfusionCounts::new(1, 1, 0, 0);
        assert_eq!(precision(&c), 0.5);
        assert_eq!(recall(&c), 1.0);
        assert!((f1(&c) - 2.0 / 3.0).abs() < 1e-12);
        assert!((f1_harmonic(&c) - 2.0 / 3.0).abs() < 1e-12);
        let zero = ConfusionCounts::default();
        assert_eq!((precision(&zero), recall(&zero), f1(&zero)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn corpus_scoring() {
        let d = dicts();
        let mut a = OutbreakEvent::new("a");
        a.cases = Some(3);
        let gold = vec![
            GoldRecord { fileid: "a".into(), cases: Some(3), ..Default::default() },
            GoldRecord { fileid: "b".into(), cases: Some(4), country: Some("Chad".into()), ..Default::default() },
        ];
        let report = evaluate_corpus(&[a.clone(), OutbreakEvent::new("z")], &gold, &d).unwrap();
        assert_eq!(report.tasks[&Task::Cases].counts, ConfusionCounts::new(1, 0, 1, 0));
        assert_eq!(report.tasks[&Task::Country].counts, ConfusionCounts::new(0, 0, 1, 1));
        assert_eq!(report.tasks[&Task::Disease].counts, ConfusionCounts::new(0, 0, 0, 2));
        assert_eq!(report.unmatched_gold, vec!["b".to_string()]);
        assert_eq!(report.ignored_predictions, vec!["z".to_string()]);
        assert!(report.to_table().lines().count() == 5);
        let back: MetricsReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(evaluate_corpus(&[a.clone(), a], &gold, &d).is_err());
    }
}
