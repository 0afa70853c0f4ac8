//! Monte Carlo prediction shared by the sampling models.

use crate::data::SurvivalRecord;
use crate::error::Result;
use crate::metrics::{Prediction, PredictionSet};
use crate::par::{try_map_range, Execution};
use crate::rng::{substream, Rng, Stream};
use crate::stats::median;

/// A model that draws event times for a covariate vector.
pub trait TimeSampler: Sync {
    /// `n` positive draws from the predictive distribution of `x`, in data time units.
    fn sample_times(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<f64>>;

    /// Median of `n` draws.
    fn predict_median(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<f64> {
        Ok(median(&self.sample_times(x, n, rng)?))
    }
}

/// Draws for every record. Record `i` uses its own random stream, so the
/// result does not depend on the execution mode.
pub fn sample_records<M: TimeSampler + ?Sized>(
    model: &M,
    records: &[SurvivalRecord],
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    try_map_range(exec, records.len(), |i| {
        let mut rng = substream(seed, Stream::Predict, i as u64);
        model.sample_times(&records[i].x, n, &mut rng)
    })
}

pub fn prediction_set<M: TimeSampler + ?Sized>(
    model: &M,
    records: &[SurvivalRecord],
    n: usize,
    seed: u64,
    t_max: f64,
    exec: Execution,
) -> Result<PredictionSet> {
    let samples = sample_records(model, records, n, seed, exec)?;
    let records = records
        .iter()
        .zip(samples)
        .map(|(r, s)| Prediction::from_samples(r.t, r.event, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionSet { records, t_max })
}
