use serde::{Deserialize, Serialize};

use super::network::DateModel;
use super::DateConfig;
use crate::data::{Split, SurvivalDataset};
use crate::error::{Error, Result};
use crate::nn::{AdamState, ForwardCtx, Graph};
use crate::par::Execution;
use crate::predict::prediction_set;
use crate::rng::{substream, Stream};
use crate::training::{minibatches, validation_score, EarlyStopping};

/// One line of the training log; losses are minibatch means over the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateEpochLog {
    pub epoch: usize,
    pub l1_disc: f64,
    pub l1_gen: f64,
    pub l2: f64,
    pub l3: f64,
    pub validation_metric: Option<f64>,
    pub best: bool,
}

/// Train on the train split with early stopping on the validation split.
/// Returns the best-validation model and the epoch log.
pub fn train(
    dataset: &SurvivalDataset,
    config: &DateConfig,
) -> Result<(DateModel, Vec<DateEpochLog>)> {
    config.validate()?;
    let train_idx = dataset.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::Batch("training split is empty".into()));
    }
    if !train_idx.iter().any(|&i| dataset.records[i].event) {
        return Err(Error::NoEvents("training split".into()));
    }
    if train_idx.iter().all(|&i| dataset.records[i].event) {
        log::warn!("training split has no censored records; the censored loss is inactive");
    }
    let val_records = dataset.split_records(Split::Validation);
    let time_scale = dataset.t_max_of(Split::Train);

    let mut model = DateModel::new(dataset.n_features(), config.clone())?;
    model.set_time_scale(time_scale)?;
    model.mark_trained();
    let tc = &config.train;
    let mut opt_g = AdamState::new(tc.adam(), model.generator_store());
    let mut opt_d = AdamState::new(tc.adam(), model.discriminator_store());

    let mut stopper = EarlyStopping::new(tc.patience);
    let mut best = model.clone();
    let mut log = Vec::with_capacity(tc.epochs);

    for epoch in 0..tc.epochs {
        let e = epoch as u64;
        let mut shuffle = substream(tc.seed, Stream::Shuffle, e);
        let mut noise_rng = substream(tc.seed, Stream::Noise, e);
        let mut drop_g = substream(tc.seed, Stream::Dropout, 2 * e);
        let mut drop_d = substream(tc.seed, Stream::Dropout, 2 * e + 1);
        let (mut sum_d, mut sum_g, mut sum_l2, mut sum_l3) = (0.0, 0.0, 0.0, 0.0);
        let (mut n_adv, mut n_l2, mut n_batches) = (0usize, 0usize, 0usize);

        for idx in minibatches(&train_idx, tc.batch_size, &mut shuffle) {
            let batch = dataset.batch(&idx)?;
            let ev: Vec<usize> = (0..batch.len()).filter(|&i| batch.event[i]).collect();
            n_batches += 1;

            if !ev.is_empty() {
                let x_ev = batch.x.select_rows(&ev);
                let t_ev: Vec<f64> = ev.iter().map(|&i| batch.t[i]).collect();
                for _ in 0..config.discriminator_steps {
                    let noise = model.draw_noise(ev.len(), &mut noise_rng);
                    let mut g = Graph::new();
                    let mut gctx = ForwardCtx::train(&mut drop_g);
                    let fake =
                        model.generate(&mut g, &x_ev, &vec![true; ev.len()], &noise, &mut gctx)?;
                    let fake = g.value(fake).clone();
                    let mut dctx = ForwardCtx::train(&mut drop_d);
                    let loss =
                        model.discriminator_objective(&mut g, &x_ev, &t_ev, &fake, &mut dctx)?;
                    g.check_finite(loss, "discriminator loss")?;
                    sum_d += g.value(loss).item();
                    let grads = g.backward_for(loss, model.discriminator_store())?;
                    let (_, disc_store) = model.stores_mut();
                    opt_d.step(disc_store, &grads)?;
                    dctx.commit(disc_store);
                }
                n_adv += 1;
            }

            for _ in 0..config.generator_steps {
                let noise = model.draw_noise(batch.len(), &mut noise_rng);
                let mut g = Graph::new();
                let mut gctx = ForwardCtx::train(&mut drop_g);
                let mut dctx = ForwardCtx::train(&mut drop_d);
                let obj =
                    model.generator_objective(&mut g, &batch, &noise, &mut gctx, &mut dctx)?;
                if let Some(a) = obj.adversarial {
                    sum_g += g.value(a).item();
                }
                if let Some((h, _)) = obj.censored {
                    sum_l2 += g.value(h).item();
                    n_l2 += 1;
                }
                if let Some((d, _)) = obj.distortion {
                    sum_l3 += g.value(d).item();
                }
                let grads = g.backward_for(obj.total, model.generator_store())?;
                let (gen_store, _) = model.stores_mut();
                opt_g.step(gen_store, &grads)?;
                gctx.commit(gen_store);
            }
        }

        let steps_d = (n_adv * config.discriminator_steps).max(1) as f64;
        let steps_g = (n_adv * config.generator_steps).max(1) as f64;
        let validation_metric = if val_records.is_empty() {
            None
        } else {
            let set = prediction_set(
                &model,
                &val_records,
                tc.validation_samples,
                tc.seed,
                time_scale,
                Execution::default(),
            )?;
            Some(validation_score(&set)?)
        };
        let is_best = match validation_metric {
            Some(v) => stopper.observe(epoch, v),
            None => true,
        };
        if is_best {
            best = model.clone();
            best.optimizers = Some((opt_g.clone(), opt_d.clone()));
        }
        let entry = DateEpochLog {
            epoch,
            l1_disc: sum_d / steps_d,
            l1_gen: sum_g / steps_g,
            l2: sum_l2 / (n_l2 * config.generator_steps).max(1) as f64,
            l3: sum_l3 / steps_g,
            validation_metric,
            best: is_best,
        };
        log::debug!("date epoch {epoch}: {entry:?} ({n_batches} batches)");
        log.push(entry);
        if stopper.should_stop() {
            log::info!(
                "early stop at epoch {epoch}; best epoch {:?}",
                stopper.best_epoch
            );
            break;
        }
    }
    Ok((best, log))
}
