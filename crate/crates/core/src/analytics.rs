//! Dataset statistics, outbreak time series and least-squares regression.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ensemble::{SynonymDictionaries, SynonymDictionary};
use crate::error::{Error, Result};
use crate::event::OutbreakEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountKey {
    Disease,
    Country,
    /// Country and disease together, labelled `Country – Disease`.
    Pair,
}

/// Maps surface forms to canonical labels; identity without dictionaries.
#[derive(Clone, Copy, Debug, Default)]
pub struct Labeler<'a> {
    dicts: Option<&'a SynonymDictionaries>,
}

impl<'a> Labeler<'a> {
    pub fn new(dicts: Option<&'a SynonymDictionaries>) -> Self {
        Labeler { dicts }
    }

    fn canonical<'t>(dict: Option<&'t SynonymDictionary>, term: &'t str) -> &'t str {
        dict.map_or(term, |d| d.canonicalize(term))
    }

    pub fn disease<'t>(&'t self, e: &'t OutbreakEvent) -> Option<&'t str> {
        e.disease.as_deref().map(|d| Self::canonical(self.dicts.map(|x| &x.disease), d))
    }

    pub fn country<'t>(&'t self, e: &'t OutbreakEvent) -> Option<&'t str> {
        e.country.as_deref().map(|c| Self::canonical(self.dicts.map(|x| &x.country), c))
    }

    pub fn label(&self, e: &OutbreakEvent, key: CountKey) -> Option<String> {
        match key {
            CountKey::Disease => self.disease(e).map(str::to_string),
            CountKey::Country => self.country(e).map(str::to_string),
            CountKey::Pair => Some(format!("{} \u{2013} {}", self.country(e)?, self.disease(e)?)),
        }
    }
}

/// The `n` most frequent labels, descending by count, ties by label.
pub fn top_counts(records: &[OutbreakEvent], key: CountKey, n: usize, labeler: Labeler) -> Vec<(String, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for r in records {
        if let Some(label) = labeler.label(r, key) {
            *counts.entry(label).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub entries: usize,
    pub unique_diseases: usize,
    pub unique_countries: usize,
}

/// Counts over rows that name a country or a disease; rows missing both are dropped.
pub fn dataset_summary(records: &[OutbreakEvent], labeler: Labeler) -> DatasetSummary {
    let kept: Vec<&OutbreakEvent> = records
        .iter()
        .filter(|r| r.country.is_some() || r.disease.is_some())
        .collect();
    let diseases: BTreeSet<&str> = kept.iter().filter_map(|r| labeler.disease(r)).collect();
    let countries: BTreeSet<&str> = kept.iter().filter_map(|r| labeler.country(r)).collect();
    DatasetSummary {
        entries: kept.len(),
        unique_diseases: diseases.len(),
        unique_countries: countries.len(),
    }
}

/// `(date, cases)` for every record of the given outbreak with both values
/// present, ordered by date and then fileid.
pub fn time_series(records: &[OutbreakEvent], disease: &str, country: &str, labeler: Labeler) -> Vec<(NaiveDate, u64)> {
    let mut points: Vec<(NaiveDate, &str, u64)> = records
        .iter()
        .filter(|r| labeler.disease(r) == Some(disease) && labeler.country(r) == Some(country))
        .filter_map(|r| Some((r.date?, r.fileid.as_str(), r.cases?)))
        .collect();
    points.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    points.into_iter().map(|(d, _, c)| (d, c)).collect()
}

/// Total cases per calendar year, ascending.
pub fn yearly_aggregate(series: &[(NaiveDate, u64)]) -> Vec<(i32, u64)> {
    let mut totals: BTreeMap<i32, u64> = BTreeMap::new();
    for (date, cases) in series {
        *totals.entry(date.year()).or_default() += cases;
    }
    totals.into_iter().collect()
}

/// Fitted line plus inference on the slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub r: f64,
    pub n: usize,
}

/// Least-squares line `y = intercept + slope * x` with a 95% interval and a
/// two-sided p-value for the slope from Student's t with `n - 2` degrees of freedom.
pub fn ols_regression(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(Error::Regression("x and y differ in length"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Regression("fewer than 3 points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite value"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 || sxx <= f64::EPSILON * x.iter().map(|v| v * v).sum::<f64>() {
        return Err(Error::Regression("x is constant"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let df = nf - 2.0;
    let slope_se = (rss / df / sxx).sqrt();
    let t_crit = student_t_quantile(0.975, df);
    let (t_statistic, p_value) = if slope_se > 0.0 {
        let t = slope / slope_se;
        (t, student_t_two_sided_p(t, df))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        (f64::INFINITY.copysign(slope), 0.0)
    };
    let r = if syy == 0.0 { 0.0 } else { (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0) };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_se,
        ci95_low: slope - t_crit * slope_se,
        ci95_high: slope + t_crit * slope_se,
        t_statistic,
        p_value,
        r,
        n,
    })
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function, evaluated by the
/// modified Lentz method.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// P(T <= t) for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`student_t_cdf`] for `p` in (0, 1), by bracketing and bisection.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must be in (0, 1)");
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -student_t_quantile(1.0 - p, df);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str, disease: Option<&str>, country: Option<&str>) -> OutbreakEvent {
        OutbreakEvent {
            fileid: id.into(),
            disease: disease.map(Into::into),
            country: country.map(Into::into),
            ..Default::default()
        }
    }

    #[test]
    fn ranking_and_pairs() {
        let rs = vec![
            ev("1", Some("Cholera"), Some("Yemen")),
            ev("2", Some("Cholera"), Some("Haiti")),
            ev("3", Some("Ebola"), Some("Guinea")),
            ev("4", None, Some("Guinea")),
        ];
        let top = top_counts(&rs, CountKey::Disease, 10, Labeler::default());
        assert_eq!(top, vec![("Cholera".into(), 2), ("Ebola".into(), 1)]);
        let pairs = top_counts(&rs, CountKey::Pair, 1, Labeler::default());
        assert_eq!(pairs, vec![("Guinea \u{2013} Ebola".into(), 1)]);
        assert!(top_counts(&[], CountKey::Country, 5, Labeler::default()).is_empty());
    }

    #[test]
    fn summary_filters_rows_missing_both() {
        let rs = vec![ev("1", Some("Zika"), None), ev("2", None, None), ev("3", None, Some("Fiji"))];
        assert_eq!(
            dataset_summary(&rs, Labeler::default()),
            DatasetSummary { entries: 2, unique_diseases: 1, unique_countries: 1 }
        );
    }

    #[test]
    fn yearly_totals() {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        let series = [(d(2014, 1, 1), 5), (d(2014, 6, 1), 7), (d(2015, 2, 2), 1)];
        assert_eq!(yearly_aggregate(&series), vec![(2014, 12), (2015, 1)]);
        assert!(yearly_aggregate(&[]).is_empty());
    }

    #[test]
    fn series_order_and_exclusions() {
        let d = |m| NaiveDate::from_ymd_opt(2015, m, 1);
        let mut a = ev("b", Some("MERS"), Some("Saudi Arabia"));
        a.date = d(3);
        a.cases = Some(2);
        let mut b = ev("a", Some("MERS"), Some("Saudi Arabia"));
        b.date = d(3);
        b.cases = Some(9);
        let mut c = ev("c", Some("MERS"), Some("Saudi Arabia"));
        c.date = d(1);
        let series = time_series(&[a, b, c], "MERS", "Saudi Arabia", Labeler::default());
        assert_eq!(series, vec![(d(3).unwrap(), 9), (d(3).unwrap(), 2)]);
    }

    #[test]
    fn perfect_line() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = ols_regression(&x, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12 && r.intercept.abs() < 1e-12);
        assert!(r.p_value < 1e-12);
        assert!((r.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(ols_regression(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(ols_regression(&[3.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
        let flat = ols_regression(&[1.0, 2.0, 3.0], &[5.0; 3]).unwrap();
        assert_eq!((flat.slope, flat.p_value, flat.r), (0.0, 1.0, 0.0));
    }

    #[test]
    fn t_distribution_reference_points() {
        assert!((student_t_quantile(0.975, 1.0) - 12.706_204_736_174_7).abs() < 1e-8);
        assert!((student_t_quantile(0.975, 10.0) - 2.228_138_851_986_27).abs() < 1e-10);
        assert!((student_t_cdf(0.0, 5.0) - 0.5).abs() < 1e-15);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((regularized_incomplete_beta(2.0, 3.0, 0.4) - 0.5248).abs() < 1e-12);
    }
}
