//! Survival datasets: records, CSV ingestion with preprocessing, stratified
//! splitting and synthetic generation.

mod csv;
mod preprocess;
mod schema;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

pub use self::csv::{load_csv, RawTable, RawValue};
pub use preprocess::{ColumnStats, Preprocessing};
pub use schema::{FeatureKindSpec, FeatureSpec, NonPositiveTimes, Schema};
pub use split::{stratified_split, SplitFractions};
pub use synth::{generate_synthetic, Censoring, SyntheticSpec};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// One subject: covariates, observed time and event indicator (`true` = event observed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub x: Vec<f64>,
    pub t: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(x: Vec<f64>, t: f64, event: bool) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "time must be positive and finite, got {t}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates".into()));
        }
        Ok(Self { x, t, event })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    CategoricalLevel,
    MissingIndicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    /// Median used to fill missing values of a continuous source column.
    pub imputation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub records: Vec<SurvivalRecord>,
    pub features: Vec<FeatureDescriptor>,
    pub splits: Vec<Split>,
    pub time_units: String,
    pub preprocessing: Preprocessing,
}

/// Gathered rows of a dataset, ready for a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub t: Vec<f64>,
    pub event: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn from_records(records: &[SurvivalRecord]) -> Result<Self> {
        let rows: Vec<&[f64]> = records.iter().map(|r| r.x.as_slice()).collect();
        Ok(Self {
            x: Tensor::from_rows(&rows)?,
            t: records.iter().map(|r| r.t).collect(),
            event: records.iter().map(|r| r.event).collect(),
        })
    }
}

impl SurvivalDataset {
    pub fn new(
        records: Vec<SurvivalRecord>,
        features: Vec<FeatureDescriptor>,
        splits: Vec<Split>,
        time_units: impl Into<String>,
        preprocessing: Preprocessing,
    ) -> Result<Self> {
        if splits.len() != records.len() {
            return Err(Error::Shape(format!(
                "{} split labels for {} records",
                splits.len(),
                records.len()
            )));
        }
        if let Some(r) = records.iter().find(|r| r.x.len() != features.len()) {
            return Err(Error::Shape(format!(
                "record has {} covariates, dataset declares {}",
                r.x.len(),
                features.len()
            )));
        }
        Ok(Self {
            records,
            features,
            splits,
            time_units: time_units.into(),
            preprocessing,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Largest observed time over all records.
    pub fn t_max(&self) -> f64 {
        self.records.iter().map(|r| r.t).fold(0.0, f64::max)
    }

    pub fn event_fraction(&self) -> f64 {
        event_fraction(self.records.iter())
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    pub fn split_records(&self, split: Split) -> Vec<SurvivalRecord> {
        self.indices(split)
            .into_iter()
            .map(|i| self.records[i].clone())
            .collect()
    }

    pub fn split_event_fraction(&self, split: Split) -> f64 {
        event_fraction(self.indices(split).into_iter().map(|i| &self.records[i]))
    }

    pub fn t_max_of(&self, split: Split) -> f64 {
        self.indices(split)
            .into_iter()
            .map(|i| self.records[i].t)
            .fold(0.0, f64::max)
    }

    pub fn batch(&self, idx: &[usize]) -> Result<Batch> {
        let recs: Vec<SurvivalRecord> = idx.iter().map(|&i| self.records[i].clone()).collect();
        Batch::from_records(&recs)
    }

    pub fn split_batch(&self, split: Split) -> Result<Batch> {
        self.batch(&self.indices(split))
    }

    /// Re-assign split labels.
    pub fn resplit(&mut self, fractions: SplitFractions, seed: u64) -> Result<()> {
        let events: Vec<bool> = self.records.iter().map(|r| r.event).collect();
        self.splits = stratified_split(&events, fractions, seed)?;
        Ok(())
    }
}

fn event_fraction<'a>(records: impl Iterator<Item = &'a SurvivalRecord>) -> f64 {
    let (n, e) = records.fold((0usize, 0usize), |(n, e), r| (n + 1, e + r.event as usize));
    if n == 0 {
        0.0
    } else {
        e as f64 / n as f64
    }
}
