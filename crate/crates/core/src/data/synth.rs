use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::csv::{RawRow, RawTable, RawValue};
use super::preprocess::Preprocessing;
use super::schema::{FeatureKindSpec, FeatureSpec, NonPositiveTimes, Schema};
use super::split::{stratified_split, SplitFractions};
use super::{FeatureDescriptor, FeatureKind, SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::survival::ParametricSurvival;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Censoring {
    None,
    /// Every subject is censored at a fixed follow-up time.
    Administrative {
        cutoff: f64,
    },
    /// Independent exponential censoring times, rate tuned so the expected
    /// censored fraction equals `target_fraction`.
    Exponential {
        target_fraction: f64,
    },
}

/// Recipe for a synthetic survival dataset with `x ~ N(0, I)`.
///
/// Exponential and Weibull baselines get a proportional-hazards effect
/// (`h(t|x) = h₀(t) e^{xᵀβ}`); a log-normal baseline gets an AFT shift
/// (`log t = μ + xᵀβ + σξ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub beta: Vec<f64>,
    pub baseline: ParametricSurvival,
    pub censoring: Censoring,
    pub seed: u64,
    #[serde(default)]
    pub fractions: SplitFractions,
}

impl SyntheticSpec {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("synthetic.n", "must be positive"));
        }
        if self.beta.is_empty() || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::config(
                "synthetic.beta",
                "needs at least one finite coefficient",
            ));
        }
        match self.censoring {
            Censoring::Exponential { target_fraction }
                if !(0.0..1.0).contains(&target_fraction) =>
            {
                Err(Error::config(
                    "synthetic.censoring.target_fraction",
                    "must lie in [0, 1)",
                ))
            }
            Censoring::Administrative { cutoff } if !(cutoff > 0.0) => Err(Error::config(
                "synthetic.censoring.cutoff",
                "must be positive",
            )),
            _ => self.fractions.validate(),
        }
    }

    /// Event-time distribution of a subject with covariates `x`.
    pub fn conditional(&self, x: &[f64]) -> Result<ParametricSurvival> {
        let lp: f64 = x.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        match self.baseline {
            ParametricSurvival::Exponential { rate } => {
                ParametricSurvival::exponential(rate * lp.exp())
            }
            ParametricSurvival::Weibull { shape, scale } => {
                ParametricSurvival::weibull(shape, scale * (-lp / shape).exp())
            }
            ParametricSurvival::LogNormal { mu, sigma } => {
                ParametricSurvival::log_normal(mu + lp, sigma)
            }
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        (0..self.p()).map(|j| format!("x{j}")).collect()
    }
}

/// Exponential censoring rate whose expected censored fraction over `times` is `target`.
fn censoring_rate(times: &[f64], target: f64) -> f64 {
    let frac = |r: f64| times.iter().map(|t| -(-r * t).exp_m1()).sum::<f64>() / times.len() as f64;
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SurvivalDataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Data);
    let p = spec.p();
    let mut xs = Vec::with_capacity(spec.n);
    let mut times = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = spec.conditional(&x)?.sample(&mut rng);
        xs.push(x);
        times.push(t);
    }
    let censor_times: Vec<f64> = match spec.censoring {
        Censoring::None => vec![f64::INFINITY; spec.n],
        Censoring::Administrative { cutoff } => vec![cutoff; spec.n],
        Censoring::Exponential {
            target_fraction: 0.0,
        } => {
            vec![f64::INFINITY; spec.n]
        }
        Censoring::Exponential { target_fraction } => {
            let rate = censoring_rate(&times, target_fraction);
            (0..spec.n)
                .map(|_| -(1.0 - rng.random::<f64>()).ln() / rate)
                .collect()
        }
    };
    let records = xs
        .into_iter()
        .zip(times.iter().zip(&censor_times))
        .map(|(x, (&t, &c))| SurvivalRecord::new(x, t.min(c), t <= c))
        .collect::<Result<Vec<_>>>()?;
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    let splits = stratified_split(&events, spec.fractions, spec.seed)?;
    let names = spec.feature_names();
    let features = names
        .iter()
        .map(|n| FeatureDescriptor {
            name: n.clone(),
            kind: FeatureKind::Continuous,
            imputation: None,
        })
        .collect();
    SurvivalDataset::new(
        records,
        features,
        splits,
        "units",
        Preprocessing::identity(&names),
    )
}

impl SurvivalDataset {
    /// Raw table of an all-continuous dataset, for writing back to CSV.
    pub fn to_raw_table(&self) -> Result<RawTable> {
        if self
            .features
            .iter()
            .any(|f| f.kind != FeatureKind::Continuous)
        {
            return Err(Error::config(
                "dataset",
                "only all-continuous datasets convert to raw tables",
            ));
        }
        let schema = Schema {
            time_column: "time".into(),
            event_column: "event".into(),
            time_units: self.time_units.clone(),
            nonpositive_times: NonPositiveTimes::Error,
            features: self
                .features
                .iter()
                .map(|f| FeatureSpec {
                    name: f.name.clone(),
                    kind: FeatureKindSpec::Continuous,
                })
                .collect(),
        };
        let rows = self
            .records
            .iter()
            .map(|r| RawRow {
                t: r.t,
                event: r.event,
                values: r.x.iter().map(|&v| RawValue::Number(v)).collect(),
            })
            .collect();
        Ok(RawTable { schema, rows })
    }
}
