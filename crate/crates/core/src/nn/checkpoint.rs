//! JSON checkpoint container.
//!
//! ```text
//! {
//!   "format": "tte-checkpoint",
//!   "version": 1,
//!   "model": "date" | "draft" | "coxph",
//!   "seed": <u64>,
//!   "preprocessing_hash": <hex string> | null,
//!   "time_scale": <f64> | null,
//!   "config": { model-specific configuration },
//!   "networks": { "<network>": [ { "name", "value": { "rows", "cols", "data": [row-major f64] }, "trainable" } ] },
//!   "optimizers": { "<network>": { "config", "step", "first_moment": [tensor], "second_moment": [tensor] } },
//!   "vectors": { "<name>": [f64] }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::params::{Param, ParamStore};
use crate::error::{Error, Result};

pub const FORMAT: &str = "tte-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub seed: u64,
    pub preprocessing_hash: Option<String>,
    pub time_scale: Option<f64>,
    pub config: serde_json::Value,
    #[serde(default)]
    pub networks: BTreeMap<String, Vec<Param>>,
    #[serde(default)]
    pub optimizers: BTreeMap<String, AdamState>,
    #[serde(default)]
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn new(model: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            model: model.to_string(),
            seed,
            preprocessing_hash: None,
            time_scale: None,
            config,
            networks: BTreeMap::new(),
            optimizers: BTreeMap::new(),
            vectors: BTreeMap::new(),
        }
    }

    pub fn add_network(&mut self, name: &str, store: &ParamStore) {
        self.networks
            .insert(name.to_string(), store.params().to_vec());
    }

    pub fn network(&self, name: &str) -> Result<&[Param]> {
        self.networks
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Checkpoint(format!("missing network `{name}`")))
    }

    pub fn expect_model(&self, model: &str) -> Result<()> {
        if self.model == model {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "expected a {model} checkpoint, found {}",
                self.model
            )))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", c.format)));
        }
        if c.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamConfig, Tensor};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in prop::collection::vec(
            prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..40),
            seed in any::<u64>())
        {
            let mut store = ParamStore::new();
            let n = values.len();
            store.add("w", Tensor::from_vec(1, n, values.clone()).unwrap(), true);
            store.add("rm", Tensor::from_vec(n, 1, values).unwrap(), false);
            let mut adam = AdamState::new(AdamConfig::default(), &store);
            adam.step = 17;
            adam.first_moment[0] = store.value(store.find("w").unwrap()).map(|v| v * 0.1);
            let mut c = Checkpoint::new("date", seed, serde_json::json!({"k": 1}));
            c.add_network("generator", &store);
            c.optimizers.insert("generator".into(), adam);
            c.time_scale = Some(1234.5678);
            let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
            let bits = |c: &Checkpoint| -> Vec<u64> {
                c.networks["generator"].iter()
                    .flat_map(|p| p.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                    .collect()
            };
            prop_assert_eq!(bits(&c), bits(&back));
            prop_assert_eq!(&c, &back);
        }
    }

    #[test]
    fn rejects_foreign_documents() {
        let mut c = Checkpoint::new("draft", 1, serde_json::Value::Null);
        c.format = "other".into();
        assert!(Checkpoint::from_json(&c.to_json().unwrap()).is_err());
        let c = Checkpoint::new("draft", 1, serde_json::Value::Null);
        assert!(c.expect_model("date").is_err());
    }
}
