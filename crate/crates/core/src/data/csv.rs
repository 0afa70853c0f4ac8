//! Raw CSV tables.
//!
//! Files are UTF-8 with a header row and `.` as decimal separator. An empty
//! cell (or `NA` / `NaN`) is a missing covariate; time and event cells must
//! always be present. Events are `0` (censored) or `1` (observed).

use std::path::{Path, PathBuf};

use super::preprocess::Preprocessing;
use super::schema::{FeatureKindSpec, NonPositiveTimes, Schema};
use super::split::{stratified_split, SplitFractions};
use super::{SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
    Missing,
}

impl RawValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, RawValue::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub t: f64,
    pub event: bool,
    /// One cell per schema feature, in schema order.
    pub values: Vec<RawValue>,
}

/// Parsed but not yet encoded survival table.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: Schema,
    pub rows: Vec<RawRow>,
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "NaN" | "nan" | "NAN" | "na")
}

impl RawTable {
    pub fn read(path: &Path, schema: &Schema) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, schema, path)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, schema: &Schema, path: &Path) -> Result<Self> {
        schema.validate()?;
        let mut rdr = ::csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let time_idx = col(&schema.time_column)?;
        let event_idx = col(&schema.event_column)?;
        let feature_idx = schema
            .features
            .iter()
            .map(|f| col(&f.name))
            .collect::<Result<Vec<_>>>()?;

        let err = |row: usize, column: &str, message: String| Error::Parse {
            path: PathBuf::from(path),
            row,
            column: column.to_string(),
            message,
        };

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            // 1-based data row number
            let row = i + 1;
            let cell = |idx: usize| rec.get(idx).unwrap_or("").trim();

            let t_raw = cell(time_idx);
            let t: f64 = t_raw.parse().map_err(|_| {
                err(
                    row,
                    &schema.time_column,
                    format!("unparseable time `{t_raw}`"),
                )
            })?;
            if !t.is_finite() {
                return Err(err(
                    row,
                    &schema.time_column,
                    format!("non-finite time `{t_raw}`"),
                ));
            }
            if t <= 0.0 {
                match schema.nonpositive_times {
                    NonPositiveTimes::Error => {
                        return Err(err(
                            row,
                            &schema.time_column,
                            format!("time must be positive, got {t}"),
                        ))
                    }
                    NonPositiveTimes::Drop => {
                        log::warn!("{}: dropping row {row} with time {t}", path.display());
                        continue;
                    }
                }
            }

            let e_raw = cell(event_idx);
            let event = match e_raw.parse::<f64>() {
                Ok(0.0) => false,
                Ok(1.0) => true,
                _ => {
                    return Err(err(
                        row,
                        &schema.event_column,
                        format!("event must be 0 or 1, got `{e_raw}`"),
                    ))
                }
            };

            let mut values = Vec::with_capacity(feature_idx.len());
            for (spec, &idx) in schema.features.iter().zip(&feature_idx) {
                let s = cell(idx);
                let v = if is_missing_token(s) {
                    RawValue::Missing
                } else {
                    match spec.kind {
                        FeatureKindSpec::Continuous => {
                            let v: f64 = s.parse().map_err(|_| {
                                err(row, &spec.name, format!("unparseable number `{s}`"))
                            })?;
                            if v.is_finite() {
                                RawValue::Number(v)
                            } else {
                                RawValue::Missing
                            }
                        }
                        FeatureKindSpec::Categorical => RawValue::Text(s.to_string()),
                    }
                };
                values.push(v);
            }
            rows.push(RawRow { t, event, values });
        }
        Ok(Self {
            schema: schema.clone(),
            rows,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = ::csv::Writer::from_path(path)?;
        let mut header = vec![
            self.schema.time_column.clone(),
            self.schema.event_column.clone(),
        ];
        header.extend(self.schema.features.iter().map(|f| f.name.clone()));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                format!("{}", r.t),
                if r.event { "1" } else { "0" }.to_string(),
            ];
            rec.extend(r.values.iter().map(|v| match v {
                RawValue::Number(x) => format!("{x}"),
                RawValue::Text(s) => s.clone(),
                RawValue::Missing => String::new(),
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn events(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.event).collect()
    }

    /// Split, fit preprocessing on the training rows, and encode every row.
    pub fn into_dataset(self, fractions: SplitFractions, seed: u64) -> Result<SurvivalDataset> {
        let splits = stratified_split(&self.events(), fractions, seed)?;
        let train: Vec<usize> = (0..self.rows.len())
            .filter(|&i| splits[i] == super::Split::Train)
            .collect();
        let prep = Preprocessing::fit(&self, &train)?;
        let features = prep.descriptors();
        let records = self
            .rows
            .iter()
            .map(|r| SurvivalRecord::new(prep.encode_row(&r.values), r.t, r.event))
            .collect::<Result<Vec<_>>>()?;
        SurvivalDataset::new(
            records,
            features,
            splits,
            self.schema.time_units.clone(),
            prep,
        )
    }
}

/// Read `path` with `schema`, assign stratified splits, and encode with
/// statistics from the training split.
pub fn load_csv(
    path: &Path,
    schema: &Schema,
    fractions: SplitFractions,
    seed: u64,
) -> Result<SurvivalDataset> {
    RawTable::read(path, schema)?.into_dataset(fractions, seed)
}
