//! Optimization settings and loop utilities shared by the neural models.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{rae_report, PredictionSet};
use crate::nn::AdamConfig;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Draws per record for the per-epoch validation metric.
    pub validation_samples: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            seed: 0,
            epochs: 500,
            batch_size: 350,
            patience: 50,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            validation_samples: 50,
        }
    }
}

impl TrainingConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("train.batch_size", "must be at least 2"));
        }
        if self.validation_samples == 0 {
            return Err(Error::config(
                "train.validation_samples",
                "must be at least 1",
            ));
        }
        self.adam().validate("train.")
    }
}

/// Shuffled minibatches; a trailing batch of one record is folded into its predecessor.
pub(crate) fn minibatches(indices: &[usize], batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order = indices.to_vec();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().unwrap_or_default();
        if let Some(prev) = batches.last_mut() {
            prev.extend(tail);
        }
    }
    batches
}

/// Validation score: median non-censored RAE plus median censored RAE.
/// A group absent from the split contributes zero.
pub fn validation_score(set: &PredictionSet) -> Result<f64> {
    let r = rae_report(set)?;
    Ok(r.noncensored.map_or(0.0, |s| s.median) + r.censored.map_or(0.0, |s| s.median))
}

/// Tracks the best score; reports when patience runs out.
#[derive(Debug, Clone)]
pub(crate) struct EarlyStopping {
    patience: usize,
    pub best: f64,
    pub best_epoch: Option<usize>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            stale: 0,
        }
    }

    /// Record `score` for `epoch`; returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score < self.best {
            self.best = score;
            self.best_epoch = Some(epoch);
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.patience > 0 && self.stale >= self.patience
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn minibatches_partition_indices() {
        let idx: Vec<usize> = (0..11).collect();
        let b = minibatches(&idx, 5, &mut stream(3, Stream::Shuffle));
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 6]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, idx);
    }

    #[test]
    fn early_stopping_counts_stale_epochs() {
        let mut es = EarlyStopping::new(2);
        assert!(es.observe(0, 1.0));
        assert!(!es.observe(1, 1.0));
        assert!(!es.should_stop());
        assert!(!es.observe(2, 2.0));
        assert!(es.should_stop());
        assert_eq!(es.best_epoch, Some(0));
        assert!(!EarlyStopping {
            stale: 100,
            ..EarlyStopping::new(0)
        }
        .should_stop());
    }

    #[test]
    fn defaults_validate_and_errors_name_fields() {
        TrainingConfig::default().validate().unwrap();
        let bad = TrainingConfig {
            batch_size: 1,
            ..TrainingConfig::default()
        };
        assert!(bad
            .validate()
            .unwrap_err()
            .to_string()
            .contains("train.batch_size"));
    }
}
