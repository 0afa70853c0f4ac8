//! Log-normal accelerated-failure-time model with neural location and scale,
//! trained on the censored likelihood plus a pairwise ranking reward.

mod objective;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use objective::{comparable_pairs, lognormal_log_likelihood, rank_regularizer, LikelihoodForm};

use crate::data::{Batch, Split, SurvivalDataset};
use crate::error::{Error, Result};
use crate::nn::{
    AdamState, Checkpoint, ForwardCtx, Graph, Mlp, MlpConfig, ParamId, ParamStore, Tensor, Var,
};
use crate::par::Execution;
use crate::predict::{prediction_set, TimeSampler};
use crate::rng::{substream, Rng, Stream};
use crate::training::{minibatches, validation_score, EarlyStopping, TrainingConfig};

/// How `σ²(x)` is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceHead {
    /// A second output of the network.
    #[default]
    Covariate,
    /// A single learned log-variance shared by all records.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DraftConfig {
    pub hidden: Vec<usize>,
    /// Weight of the ranking reward.
    pub eta: f64,
    pub likelihood: LikelihoodForm,
    pub variance: VarianceHead,
    pub sigma_floor: f64,
    pub keep_prob: f64,
    pub batch_norm: bool,
    pub train: TrainingConfig,
}

impl Default for DraftConfig {
    fn default() -> Self {
        Self {
            hidden: vec![50, 50],
            eta: 1.0,
            likelihood: LikelihoodForm::TimeDensity,
            variance: VarianceHead::Covariate,
            sigma_floor: 1e-4,
            keep_prob: 0.8,
            batch_norm: true,
            train: TrainingConfig::default(),
        }
    }
}

impl DraftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::config(
                "model.hidden",
                "layer widths must be positive",
            ));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("model.eta", "must be finite and nonnegative"));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(Error::config("model.sigma_floor", "must be positive"));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::config("model.keep_prob", "must lie in (0, 1]"));
        }
        self.train.validate()
    }
}

/// Graph nodes of one objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DraftObjective {
    /// `-mean log-likelihood - η R`.
    pub total: Var,
    pub nll: Var,
    pub rank: Option<Var>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftEpochLog {
    pub epoch: usize,
    pub nll: f64,
    pub rank: f64,
    pub validation_metric: Option<f64>,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftModel {
    pub config: DraftConfig,
    n_features: usize,
    store: ParamStore,
    net: Mlp,
    log_var: Option<ParamId>,
    time_scale: f64,
    trained: bool,
    optimizer: Option<AdamState>,
}

impl DraftModel {
    pub fn new(n_features: usize, config: DraftConfig) -> Result<Self> {
        config.validate()?;
        if n_features == 0 {
            return Err(Error::config("data", "dataset has no covariates"));
        }
        let mut store = ParamStore::new();
        let output = match config.variance {
            VarianceHead::Covariate => 2,
            VarianceHead::Constant => 1,
        };
        let net = Mlp::new(
            &mut store,
            "draft",
            MlpConfig {
                input: n_features,
                hidden: config.hidden.clone(),
                output,
                batch_norm: config.batch_norm,
                keep_prob: config.keep_prob,
                noise: vec![None; config.hidden.len() + 1],
            },
            &mut substream(config.train.seed, Stream::Init, 0),
        )?;
        let log_var = (config.variance == VarianceHead::Constant)
            .then(|| store.add("draft.log_var", Tensor::scalar(0.0), true));
        Ok(Self {
            config,
            n_features,
            store,
            net,
            log_var,
            time_scale: 1.0,
            trained: false,
            optimizer: None,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn set_time_scale(&mut self, scale: f64) -> Result<()> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!(
                "time scale must be positive, got {scale}"
            )));
        }
        self.time_scale = scale;
        Ok(())
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// `(μ, σ)` columns on the scaled time axis.
    pub fn heads(&self, g: &mut Graph, x: &Tensor, ctx: &mut ForwardCtx) -> Result<(Var, Var)> {
        if x.cols() != self.n_features {
            return Err(Error::Shape(format!(
                "expected {} covariates, got {}",
                self.n_features,
                x.cols()
            )));
        }
        let xv = g.input(x.clone());
        let none = vec![None; self.config.hidden.len() + 1];
        let out = self.net.forward(g, &self.store, xv, &none, ctx)?;
        let mu = g.column(out, 0);
        let s = match self.log_var {
            Some(id) => {
                let lv = g.param(&self.store, id);
                let zeros = g.constant(x.rows(), 1, 0.0);
                g.add_row(zeros, lv)
            }
            None => g.column(out, 1),
        };
        let half = g.scale(s, 0.5);
        let sd = g.exp(half);
        let sigma = g.clamp_min(sd, self.config.sigma_floor);
        g.check_finite(sigma, "σ head")?;
        Ok((mu, sigma))
    }

    /// `(μ(x), σ(x))` per row, with `μ` on the log scale of data time units.
    pub fn location_scale(&self, x: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new();
        let (mu, sigma) = self.heads(&mut g, x, &mut ForwardCtx::inference())?;
        let shift = self.time_scale.ln();
        Ok((
            g.value(mu).data().iter().map(|m| m + shift).collect(),
            g.value(sigma).data().to_vec(),
        ))
    }

    fn log_times(&self, batch: &Batch) -> Result<Vec<f64>> {
        batch
            .t
            .iter()
            .map(|&t| {
                if t > 0.0 {
                    Ok((t / self.time_scale).ln())
                } else {
                    Err(Error::Domain(format!("time must be positive, got {t}")))
                }
            })
            .collect()
    }

    /// Training objective `-mean log-likelihood - η R` on one batch.
    pub fn objective(
        &self,
        g: &mut Graph,
        batch: &Batch,
        ctx: &mut ForwardCtx,
    ) -> Result<DraftObjective> {
        let lt = self.log_times(batch)?;
        let (mu, sigma) = self.heads(g, &batch.x, ctx)?;
        let ll = lognormal_log_likelihood(g, mu, sigma, &lt, &batch.event, self.config.likelihood)?;
        let nll = g.scale(ll, -1.0 / batch.len() as f64);
        let rank = rank_regularizer(g, mu, &batch.t, &batch.event);
        let total = match rank {
            Some(r) if self.config.eta > 0.0 => {
                let w = g.scale(r, self.config.eta);
                g.sub(nll, w)
            }
            _ => nll,
        };
        Ok(DraftObjective { total, nll, rank })
    }

    /// Summed log-likelihood of `batch` in data time units, inference mode.
    pub fn log_likelihood(&self, batch: &Batch) -> Result<f64> {
        let (mu, sigma) = self.location_scale(&batch.x)?;
        let lt = batch
            .t
            .iter()
            .map(|&t| {
                if t > 0.0 {
                    Ok(t.ln())
                } else {
                    Err(Error::Domain(format!("time must be positive, got {t}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut g = Graph::new();
        let m = g.input(Tensor::column(mu));
        let s = g.input(Tensor::column(sigma));
        let v = lognormal_log_likelihood(&mut g, m, s, &lt, &batch.event, self.config.likelihood)?;
        Ok(g.value(v).item())
    }

    /// Ranking reward on `batch`; zero with a warning when no pair is comparable.
    pub fn rank_regularizer(&self, batch: &Batch) -> Result<f64> {
        let mut g = Graph::new();
        let (mu, _) = self.heads(&mut g, &batch.x, &mut ForwardCtx::inference())?;
        match rank_regularizer(&mut g, mu, &batch.t, &batch.event) {
            Some(r) => Ok(g.value(r).item()),
            None => {
                log::warn!("ranking term has no comparable pairs; using 0");
                Ok(0.0)
            }
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut cp = Checkpoint::new(
            "draft",
            self.config.train.seed,
            serde_json::json!({ "n_features": self.n_features, "model": self.config }),
        );
        cp.time_scale = self.trained.then_some(self.time_scale);
        cp.add_network("draft", &self.store);
        if let Some(o) = &self.optimizer {
            cp.optimizers.insert("draft".into(), o.clone());
        }
        Ok(cp)
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        cp.expect_model("draft")?;
        let n_features = cp.config["n_features"]
            .as_u64()
            .ok_or_else(|| Error::Checkpoint("missing n_features".into()))?
            as usize;
        let config: DraftConfig = serde_json::from_value(cp.config["model"].clone())?;
        let mut m = Self::new(n_features, config)?;
        m.store.load(cp.network("draft")?)?;
        if let Some(s) = cp.time_scale {
            m.set_time_scale(s)?;
            m.trained = true;
        }
        m.optimizer = cp.optimizers.get("draft").cloned();
        Ok(m)
    }
}

impl TimeSampler for DraftModel {
    fn sample_times(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        if n == 0 {
            return Err(Error::config("eval.samples", "must be at least 1"));
        }
        let (mu, sigma) = self.location_scale(&Tensor::from_vec(1, x.len(), x.to_vec())?)?;
        Ok((0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                (mu[0] + sigma[0] * z).exp().max(f64::MIN_POSITIVE)
            })
            .collect())
    }
}

/// Minibatch Adam on the train split with early stopping on validation.
pub fn train(
    dataset: &SurvivalDataset,
    config: &DraftConfig,
) -> Result<(DraftModel, Vec<DraftEpochLog>)> {
    config.validate()?;
    let train_idx = dataset.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::Batch("training split is empty".into()));
    }
    let val_records = dataset.split_records(Split::Validation);
    let time_scale = dataset.t_max_of(Split::Train);
    let mut model = DraftModel::new(dataset.n_features(), config.clone())?;
    model.set_time_scale(time_scale)?;
    model.trained = true;
    let tc = &config.train;
    let mut opt = AdamState::new(tc.adam(), &model.store);
    let mut stopper = EarlyStopping::new(tc.patience);
    let mut best = model.clone();
    let mut log = Vec::with_capacity(tc.epochs);

    for epoch in 0..tc.epochs {
        let e = epoch as u64;
        let mut shuffle = substream(tc.seed, Stream::Shuffle, e);
        let mut dropout = substream(tc.seed, Stream::Dropout, e);
        let (mut sum_nll, mut sum_rank, mut n_batches) = (0.0, 0.0, 0usize);
        for idx in minibatches(&train_idx, tc.batch_size, &mut shuffle) {
            let batch = dataset.batch(&idx)?;
            let mut g = Graph::new();
            let mut ctx = ForwardCtx::train(&mut dropout);
            let obj = model.objective(&mut g, &batch, &mut ctx)?;
            g.check_finite(obj.total, "DRAFT loss")?;
            sum_nll += g.value(obj.nll).item();
            sum_rank += obj.rank.map_or(0.0, |r| g.value(r).item());
            n_batches += 1;
            let grads = g.backward(obj.total)?;
            opt.step(&mut model.store, &grads)?;
            ctx.commit(&mut model.store);
        }
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
            best.optimizer = Some(opt.clone());
        }
        let nb = n_batches.max(1) as f64;
        log.push(DraftEpochLog {
            epoch,
            nll: sum_nll / nb,
            rank: sum_rank / nb,
            validation_metric,
            best: is_best,
        });
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

#[cfg(test)]
mod tests;
