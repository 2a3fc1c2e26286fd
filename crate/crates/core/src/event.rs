use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Fused per-report facts, one row of the published dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutbreakEvent {
    pub fileid: String,
    pub disease: Option<String>,
    pub country: Option<String>,
    pub date: Option<NaiveDate>,
    pub imputed_date: Option<NaiveDate>,
    pub cases: Option<u64>,
    pub deaths: Option<u64>,
}

impl OutbreakEvent {
    pub fn new(fileid: impl Into<String>) -> Self {
        OutbreakEvent {
            fileid: fileid.into(),
            ..Default::default()
        }
    }

    /// Number of populated fields, not counting the fileid.
    pub fn populated_fields(&self) -> usize {
        [
            self.disease.is_some(),
            self.country.is_some(),
            self.date.is_some(),
            self.imputed_date.is_some(),
            self.cases.is_some(),
            self.deaths.is_some(),
        ]
        .into_iter()
        .filter(|p| *p)
        .count()
    }
}
