//! Run configuration file.
//!
//! ```toml
//! seed = 7             # run seed: splits, synthetic data, training, prediction
//! out = "runs/demo"    # artifact directory
//!
//! [data]
//! csv = "flchain.csv"              # either csv + schema ...
//! schema = "flchain.schema.toml"
//! # [data.synthetic]               # ... or a synthetic recipe
//! # n = 2000
//! # beta = [0.8, -0.6, 0.4]
//! # baseline = { family = "log_normal", mu = 2.0, sigma = 0.5 }
//! # censoring = { kind = "exponential", target_fraction = 0.3 }
//! [data.fractions]
//! train = 0.8
//! validation = 0.1
//! test = 0.1
//!
//! [model]
//! kind = "date"        # date | draft | coxph, followed by that model's options
//! hidden = [50, 50]
//!
//! [train]
//! epochs = 500
//! learning_rate = 3e-4
//!
//! [eval]
//! samples = 200
//! interval_level = 0.95
//! sample_dump = true
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use tte_core::coxph::CoxConfig;
use tte_core::data::{Censoring, SplitFractions, SyntheticSpec};
use tte_core::date::DateConfig;
use tte_core::draft::DraftConfig;
use tte_core::training::TrainingConfig;
use tte_core::ParametricSurvival;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Date,
    Draft,
    Coxph,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Date => "date",
            ModelKind::Draft => "draft",
            ModelKind::Coxph => "coxph",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "date" => Ok(ModelKind::Date),
            "draft" => Ok(ModelKind::Draft),
            "coxph" => Ok(ModelKind::Coxph),
            other => bail!("model.kind: unknown model `{other}` (expected date, draft or coxph)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Date(DateConfig),
    Draft(DraftConfig),
    Coxph(CoxConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Date(_) => ModelKind::Date,
            ModelSpec::Draft(_) => ModelKind::Draft,
            ModelSpec::Coxph(_) => ModelKind::Coxph,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Date => ModelSpec::Date(DateConfig::default()),
            ModelKind::Draft => ModelSpec::Draft(DraftConfig::default()),
            ModelKind::Coxph => ModelSpec::Coxph(CoxConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n: usize,
    pub beta: Vec<f64>,
    pub baseline: ParametricSurvival,
    pub censoring: Censoring,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub fractions: SplitFractions,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Draws per test record.
    pub samples: usize,
    pub interval_level: f64,
    /// Write the per-record sample CSV next to the report.
    pub sample_dump: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            samples: 200,
            interval_level: 0.95,
            sample_dump: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    out: Option<PathBuf>,
    data: DataSection,
    #[serde(default)]
    model: Option<toml::Table>,
    #[serde(default)]
    train: Option<toml::Table>,
    #[serde(default)]
    eval: EvalSection,
}

/// Where the records come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { csv: PathBuf, schema: PathBuf },
    Synthetic(SyntheticSection),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub source: DataSource,
    pub fractions: SplitFractions,
    pub model: ModelSpec,
    pub train: TrainingConfig,
    pub eval: EvalSection,
}

fn field_error(e: tte_core::Error, prefix: &str) -> anyhow::Error {
    match e {
        tte_core::Error::Config { field, message } => {
            anyhow!("invalid configuration: {prefix}{field}: {message}")
        }
        other => anyhow!(other),
    }
}

fn model_spec(table: Option<toml::Table>) -> Result<ModelSpec> {
    let Some(mut table) = table else {
        return Ok(ModelSpec::Date(DateConfig::default()));
    };
    let kind = match table.remove("kind") {
        Some(toml::Value::String(s)) => ModelKind::parse(&s)?,
        Some(_) => bail!("model.kind: must be a string"),
        None => ModelKind::Date,
    };
    if table.contains_key("train") {
        bail!("model.train: training options belong in the [train] section");
    }
    let ctx = || format!("[model] section for kind `{}`", kind.as_str());
    Ok(match kind {
        ModelKind::Date => ModelSpec::Date(table.try_into().with_context(ctx)?),
        ModelKind::Draft => ModelSpec::Draft(table.try_into().with_context(ctx)?),
        ModelKind::Coxph => ModelSpec::Coxph(table.try_into().with_context(ctx)?),
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let source = match (raw.data.csv, raw.data.schema, raw.data.synthetic) {
            (Some(csv), Some(schema), None) => {
                let (csv, schema) = (resolve(base, &csv), resolve(base, &schema));
                for (field, p) in [("data.csv", &csv), ("data.schema", &schema)] {
                    if !p.is_file() {
                        bail!(
                            "invalid configuration: {field}: file {} does not exist",
                            p.display()
                        );
                    }
                }
                DataSource::Csv { csv, schema }
            }
            (Some(_), None, None) => {
                bail!("invalid configuration: data.schema: required with data.csv")
            }
            (None, Some(_), None) => {
                bail!("invalid configuration: data.csv: required with data.schema")
            }
            (None, None, Some(s)) => DataSource::Synthetic(s),
            (None, None, None) => {
                bail!("invalid configuration: data: set either `csv` + `schema` or `synthetic`")
            }
            _ => bail!("invalid configuration: data: `csv` and `synthetic` are mutually exclusive"),
        };
        raw.data
            .fractions
            .validate()
            .map_err(|e| field_error(e, "data."))?;

        let mut train: TrainingConfig = match raw.train {
            Some(t) => {
                if t.contains_key("seed") {
                    bail!("invalid configuration: train.seed: set the run seed with top-level `seed` or --seed");
                }
                t.try_into().context("[train] section")?
            }
            None => TrainingConfig::default(),
        };
        train.seed = raw.seed;

        let config = Self {
            seed: raw.seed,
            out: resolve(base, &raw.out.unwrap_or_else(|| PathBuf::from("out"))),
            source,
            fractions: raw.data.fractions,
            model: model_spec(raw.model)?,
            train,
            eval: raw.eval,
        };
        config.validate()?;
        Ok(config)
    }

    /// Replace the run seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    /// Switch model kind; options for a different kind fall back to defaults.
    pub fn set_model(&mut self, kind: ModelKind) {
        if self.model.kind() != kind {
            self.model = ModelSpec::default_for(kind);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic(s) = &self.source {
            self.synthetic_spec(s)
                .validate()
                .map_err(|e| field_error(e, "data."))?;
        }
        self.train.validate().map_err(|e| field_error(e, ""))?;
        match &self.model {
            ModelSpec::Date(c) => c.validate(),
            ModelSpec::Draft(c) => c.validate(),
            ModelSpec::Coxph(c) => c.validate(),
        }
        .map_err(|e| field_error(e, ""))?;
        if self.eval.samples == 0 {
            bail!("invalid configuration: eval.samples: must be at least 1");
        }
        if !(self.eval.interval_level > 0.0 && self.eval.interval_level < 1.0) {
            bail!("invalid configuration: eval.interval_level: must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn synthetic_spec(&self, s: &SyntheticSection) -> SyntheticSpec {
        SyntheticSpec {
            n: s.n,
            beta: s.beta.clone(),
            baseline: s.baseline,
            censoring: s.censoring,
            seed: self.seed,
            fractions: self.fractions,
        }
    }

    /// DATE configuration with the `[train]` section applied.
    pub fn date_config(&self) -> Option<DateConfig> {
        match &self.model {
            ModelSpec::Date(c) => Some(DateConfig {
                train: self.train.clone(),
                ..c.clone()
            }),
            _ => None,
        }
    }

    pub fn draft_config(&self) -> Option<DraftConfig> {
        match &self.model {
            ModelSpec::Draft(c) => Some(DraftConfig {
                train: self.train.clone(),
                ..c.clone()
            }),
            _ => None,
        }
    }
}
