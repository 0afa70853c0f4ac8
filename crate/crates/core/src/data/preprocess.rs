use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::csv::{RawTable, RawValue};
use super::{FeatureDescriptor, FeatureKind};
use crate::error::{Error, Result};
use crate::stats;

/// Statistics fitted on the training split for one source column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnStats {
    Continuous {
        name: String,
        mean: f64,
        std: f64,
        median: f64,
        indicator: bool,
    },
    Categorical {
        name: String,
        levels: Vec<String>,
        indicator: bool,
    },
}

/// Encoding recipe: standardization, imputation and one-hot levels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Preprocessing {
    pub columns: Vec<ColumnStats>,
}

impl Preprocessing {
    /// Continuous columns already on the model scale (synthetic data).
    pub fn identity(names: &[String]) -> Self {
        Self {
            columns: names
                .iter()
                .map(|n| ColumnStats::Continuous {
                    name: n.clone(),
                    mean: 0.0,
                    std: 1.0,
                    median: 0.0,
                    indicator: false,
                })
                .collect(),
        }
    }

    pub fn fit(table: &RawTable, train_rows: &[usize]) -> Result<Self> {
        let mut columns = Vec::with_capacity(table.schema.features.len());
        for (c, spec) in table.schema.features.iter().enumerate() {
            let indicator = table.rows.iter().any(|r| r.values[c].is_missing());
            let stats = match spec.kind {
                super::FeatureKindSpec::Continuous => {
                    let observed: Vec<f64> = train_rows
                        .iter()
                        .filter_map(|&i| match table.rows[i].values[c] {
                            RawValue::Number(v) => Some(v),
                            _ => None,
                        })
                        .collect();
                    if observed.is_empty() {
                        return Err(Error::config(
                            format!("features.{}", spec.name),
                            "no observed values in the training split",
                        ));
                    }
                    let mean = stats::mean(&observed);
                    let var = if observed.len() > 1 {
                        observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                            / (observed.len() - 1) as f64
                    } else {
                        0.0
                    };
                    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                    ColumnStats::Continuous {
                        name: spec.name.clone(),
                        mean,
                        std,
                        median: stats::median(&observed),
                        indicator,
                    }
                }
                super::FeatureKindSpec::Categorical => {
                    let mut levels: Vec<String> = table
                        .rows
                        .iter()
                        .filter_map(|r| match &r.values[c] {
                            RawValue::Text(s) => Some(s.clone()),
                            _ => None,
                        })
                        .collect();
                    levels.sort();
                    levels.dedup();
                    ColumnStats::Categorical {
                        name: spec.name.clone(),
                        levels,
                        indicator,
                    }
                }
            };
            columns.push(stats);
        }
        Ok(Self { columns })
    }

    pub fn descriptors(&self) -> Vec<FeatureDescriptor> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c {
                ColumnStats::Continuous {
                    name,
                    median,
                    indicator,
                    ..
                } => {
                    out.push(FeatureDescriptor {
                        name: name.clone(),
                        kind: FeatureKind::Continuous,
                        imputation: Some(*median),
                    });
                    if *indicator {
                        out.push(missing_descriptor(name));
                    }
                }
                ColumnStats::Categorical {
                    name,
                    levels,
                    indicator,
                } => {
                    out.extend(levels.iter().map(|l| FeatureDescriptor {
                        name: format!("{name}={l}"),
                        kind: FeatureKind::CategoricalLevel,
                        imputation: None,
                    }));
                    if *indicator {
                        out.push(missing_descriptor(name));
                    }
                }
            }
        }
        out
    }

    pub fn encode_row(&self, values: &[RawValue]) -> Vec<f64> {
        let mut x = Vec::new();
        for (c, v) in self.columns.iter().zip(values) {
            match c {
                ColumnStats::Continuous {
                    mean,
                    std,
                    median,
                    indicator,
                    ..
                } => {
                    let raw = match v {
                        RawValue::Number(n) => *n,
                        _ => *median,
                    };
                    x.push((raw - mean) / std);
                    if *indicator {
                        x.push(if v.is_missing() { 1.0 } else { 0.0 });
                    }
                }
                ColumnStats::Categorical {
                    levels, indicator, ..
                } => {
                    for l in levels {
                        x.push(matches!(v, RawValue::Text(s) if s == l) as u8 as f64);
                    }
                    if *indicator {
                        x.push(if v.is_missing() { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        x
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("preprocessing serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn missing_descriptor(name: &str) -> FeatureDescriptor {
    FeatureDescriptor {
        name: format!("{name}.missing"),
        kind: FeatureKind::MissingIndicator,
        imputation: None,
    }
}
