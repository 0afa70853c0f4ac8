use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKindSpec {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKindSpec,
}

/// What to do with rows whose time is zero or negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonPositiveTimes {
    #[default]
    Error,
    Drop,
}

/// Column layout of a survival CSV file.
///
/// ```toml
/// time_column = "futime"
/// event_column = "death"
/// time_units = "days"
///
/// [[features]]
/// name = "age"
/// kind = "continuous"
///
/// [[features]]
/// name = "sex"
/// kind = "categorical"
/// ```
///
/// Columns not listed are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub time_column: String,
    pub event_column: String,
    #[serde(default = "default_units")]
    pub time_units: String,
    #[serde(default)]
    pub nonpositive_times: NonPositiveTimes,
    #[serde(default)]
    pub features: Vec<FeatureSpec>,
}

fn default_units() -> String {
    "days".to_string()
}

impl Schema {
    pub fn from_toml(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for name in std::iter::once(&self.time_column)
            .chain(std::iter::once(&self.event_column))
            .chain(self.features.iter().map(|f| &f.name))
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::config(
                    "schema.features",
                    format!("column `{name}` listed twice"),
                ));
            }
        }
        Ok(())
    }
}
