//! Censoring-aware evaluation.
//!
//! Concordance follows Harrell: a pair `(i, j)` is comparable when
//! `t_i < t_j` and `i` had an observed event; it is concordant when `i` is
//! ranked riskier, and a tie in the prediction counts one half. Quantiles
//! interpolate linearly between order statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_slice, Execution};
use crate::stats::{median, quantile_sorted, sorted};

/// How to read a prediction when ranking risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskOrientation {
    /// Larger score = higher hazard (Cox linear predictor).
    HigherScoreHigherRisk,
    /// Smaller predicted time = higher hazard.
    LowerTimeHigherRisk,
}

/// One evaluated record: ground truth, point estimate and the samples it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub t: f64,
    pub event: bool,
    pub point: f64,
    pub samples: Vec<f64>,
}

impl Prediction {
    /// Point estimate = sample median.
    pub fn from_samples(t: f64, event: bool, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Batch("prediction needs at least one sample".into()));
        }
        Ok(Self {
            t,
            event,
            point: median(&samples),
            samples,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub records: Vec<Prediction>,
    pub t_max: f64,
}

struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }
    fn add(&mut self, i: usize) {
        let mut k = i + 1;
        while k < self.0.len() {
            self.0[k] += 1;
            k += k & k.wrapping_neg();
        }
    }
    /// Count of inserted ranks `< i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut k = i;
        let mut s = 0;
        while k > 0 {
            s += self.0[k];
            k -= k & k.wrapping_neg();
        }
        s
    }
}

/// Harrell's C in `O(n log n)`.
pub fn concordance_index(
    times: &[f64],
    events: &[bool],
    predictions: &[f64],
    orientation: RiskOrientation,
) -> Result<f64> {
    let n = times.len();
    if events.len() != n || predictions.len() != n {
        return Err(Error::Shape(
            "times, events and predictions must align".into(),
        ));
    }
    let risk: Vec<f64> = match orientation {
        RiskOrientation::HigherScoreHigherRisk => predictions.to_vec(),
        RiskOrientation::LowerTimeHigherRisk => predictions.iter().map(|p| -p).collect(),
    };
    if risk.iter().any(|r| r.is_nan()) {
        return Err(Error::NonFinite("predictions".into()));
    }
    let uniq = {
        let mut u = sorted(&risk);
        u.dedup();
        u
    };
    let rank = |r: f64| uniq.partition_point(|&u| u < r);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut tree = Fenwick::new(uniq.len());
    let (mut concordant, mut tied, mut comparable, mut inserted) = (0u64, 0u64, 0u64, 0u64);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && times[order[end]] == times[order[start]] {
            end += 1;
        }
        for &i in &order[start..end] {
            if events[i] {
                let r = rank(risk[i]);
                let below = tree.prefix(r);
                let at_or_below = tree.prefix(r + 1);
                concordant += below;
                tied += at_or_below - below;
                comparable += inserted;
            }
        }
        for &i in &order[start..end] {
            tree.add(rank(risk[i]));
            inserted += 1;
        }
        start = end;
    }
    if comparable == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok((2 * concordant + tied) as f64 / (2 * comparable) as f64)
}

/// Per-record relative absolute error: `|t̂ - t| / t_max` for events,
/// `max(0, t - t̂) / t_max` for censored records.
pub fn relative_absolute_error(p: &Prediction, t_max: f64) -> f64 {
    if p.event {
        (p.point - p.t).abs() / t_max
    } else {
        (p.t - p.point).max(0.0) / t_max
    }
}

/// Per-record signed error: `(t̂ - t) / t_max` for events, `min(0, t̂ - t) / t_max` when censored.
pub fn normalized_relative_error(p: &Prediction, t_max: f64) -> f64 {
    if p.event {
        (p.point - p.t) / t_max
    } else {
        (p.point - p.t).min(0.0) / t_max
    }
}

/// Median with the 25% and 75% quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let s = sorted(values);
        Some(Self {
            median: quantile_sorted(&s, 0.5),
            q25: quantile_sorted(&s, 0.25),
            q75: quantile_sorted(&s, 0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaeReport {
    pub per_record: Vec<f64>,
    pub noncensored: Option<Summary>,
    pub censored: Option<Summary>,
}

pub fn rae_report(set: &PredictionSet) -> Result<RaeReport> {
    check_t_max(set.t_max)?;
    let per_record: Vec<f64> = set
        .records
        .iter()
        .map(|p| relative_absolute_error(p, set.t_max))
        .collect();
    let pick = |event: bool| -> Vec<f64> {
        set.records
            .iter()
            .zip(&per_record)
            .filter(|(p, _)| p.event == event)
            .map(|(_, v)| *v)
            .collect()
    };
    Ok(RaeReport {
        noncensored: Summary::of(&pick(true)),
        censored: Summary::of(&pick(false)),
        per_record,
    })
}

pub const MIN_INTERVAL_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub widths: Vec<f64>,
    pub median_width_noncensored: Option<f64>,
    pub median_width_censored: Option<f64>,
    /// Fraction of observed event times inside their central interval.
    pub coverage_fraction: Option<f64>,
}

/// Central `level` interval of each record's samples.
pub fn coverage_intervals(
    set: &PredictionSet,
    level: f64,
    exec: Execution,
) -> Result<CoverageReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config("eval.interval_level", "must lie in (0, 1)"));
    }
    if let Some(p) = set
        .records
        .iter()
        .find(|p| p.samples.len() < MIN_INTERVAL_SAMPLES)
    {
        return Err(Error::Batch(format!(
            "interval needs at least {MIN_INTERVAL_SAMPLES} samples, record has {}",
            p.samples.len()
        )));
    }
    let lo_q = (1.0 - level) / 2.0;
    let bounds: Vec<(f64, f64)> = map_slice(exec, &set.records, |p| {
        let s = sorted(&p.samples);
        (quantile_sorted(&s, lo_q), quantile_sorted(&s, 1.0 - lo_q))
    });
    let widths: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let med = |event: bool| {
        let w: Vec<f64> = set
            .records
            .iter()
            .zip(&widths)
            .filter(|(p, _)| p.event == event)
            .map(|(_, w)| *w)
            .collect();
        (!w.is_empty()).then(|| median(&w))
    };
    let events: Vec<(&Prediction, &(f64, f64))> = set
        .records
        .iter()
        .zip(&bounds)
        .filter(|(p, _)| p.event)
        .collect();
    let coverage_fraction = (!events.is_empty()).then(|| {
        events
            .iter()
            .filter(|(p, (lo, hi))| p.t >= *lo && p.t <= *hi)
            .count() as f64
            / events.len() as f64
    });
    Ok(CoverageReport {
        median_width_noncensored: med(true),
        median_width_censored: med(false),
        coverage_fraction,
        widths,
    })
}

fn check_t_max(t_max: f64) -> Result<()> {
    if t_max > 0.0 && t_max.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "t_max must be positive, got {t_max}"
        )))
    }
}

/// Serialized evaluation summary. Time-based fields are `null` for models
/// that only produce risk scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub n_records: usize,
    pub n_events: usize,
    pub t_max: f64,
    pub ci: f64,
    pub rae_noncensored_median: Option<f64>,
    pub rae_noncensored_q25: Option<f64>,
    pub rae_noncensored_q75: Option<f64>,
    pub rae_censored_median: Option<f64>,
    pub rae_censored_q25: Option<f64>,
    pub rae_censored_q75: Option<f64>,
    pub nre_values: Option<Vec<f64>>,
    pub nre_censored_values: Option<Vec<f64>>,
    pub interval_width_median_noncensored: Option<f64>,
    pub interval_width_median_censored: Option<f64>,
    pub coverage_fraction: Option<f64>,
}

impl MetricReport {
    /// Full report for a sampling model.
    pub fn from_predictions(
        model: &str,
        set: &PredictionSet,
        level: f64,
        exec: Execution,
    ) -> Result<Self> {
        check_t_max(set.t_max)?;
        let times: Vec<f64> = set.records.iter().map(|p| p.t).collect();
        let events: Vec<bool> = set.records.iter().map(|p| p.event).collect();
        let points: Vec<f64> = set.records.iter().map(|p| p.point).collect();
        let ci = concordance_index(
            &times,
            &events,
            &points,
            RiskOrientation::LowerTimeHigherRisk,
        )?;
        let rae = rae_report(set)?;
        let nre = |event: bool| -> Vec<f64> {
            set.records
                .iter()
                .filter(|p| p.event == event)
                .map(|p| normalized_relative_error(p, set.t_max))
                .collect()
        };
        let cov = coverage_intervals(set, level, exec)?;
        Ok(Self {
            model: model.to_string(),
            n_records: set.records.len(),
            n_events: events.iter().filter(|&&e| e).count(),
            t_max: set.t_max,
            ci,
            rae_noncensored_median: rae.noncensored.map(|s| s.median),
            rae_noncensored_q25: rae.noncensored.map(|s| s.q25),
            rae_noncensored_q75: rae.noncensored.map(|s| s.q75),
            rae_censored_median: rae.censored.map(|s| s.median),
            rae_censored_q25: rae.censored.map(|s| s.q25),
            rae_censored_q75: rae.censored.map(|s| s.q75),
            nre_values: Some(nre(true)),
            nre_censored_values: Some(nre(false)),
            interval_width_median_noncensored: cov.median_width_noncensored,
            interval_width_median_censored: cov.median_width_censored,
            coverage_fraction: cov.coverage_fraction,
        })
    }

    /// Concordance-only report for a risk-score model.
    pub fn from_risk_scores(
        model: &str,
        times: &[f64],
        events: &[bool],
        scores: &[f64],
        t_max: f64,
    ) -> Result<Self> {
        let ci = concordance_index(
            times,
            events,
            scores,
            RiskOrientation::HigherScoreHigherRisk,
        )?;
        Ok(Self {
            model: model.to_string(),
            n_records: times.len(),
            n_events: events.iter().filter(|&&e| e).count(),
            t_max,
            ci,
            rae_noncensored_median: None,
            rae_noncensored_q25: None,
            rae_noncensored_q75: None,
            rae_censored_median: None,
            rae_censored_q25: None,
            rae_censored_q75: None,
            nre_values: None,
            nre_censored_values: None,
            interval_width_median_noncensored: None,
            interval_width_median_censored: None,
            coverage_fraction: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
