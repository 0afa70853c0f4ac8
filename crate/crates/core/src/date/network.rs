use rand::Rng as _;
use rand_distr::StandardNormal;

use super::losses::{adversarial_losses, censored_hinge, distortion, GeneratorObjective};
use super::{DateConfig, NoiseDistribution, NoisePlacement};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nn::{
    AdamState, Checkpoint, ForwardCtx, Graph, Mlp, MlpConfig, ParamStore, Tensor, Var,
};
use crate::predict::TimeSampler;
use crate::rng::{substream, Rng, Stream};

const GENERATOR_TAG: u32 = 1;
const DISCRIMINATOR_TAG: u32 = 2;

/// One noise tensor per generator affine map (`None` where no noise enters).
pub type NoiseDraw = Vec<Option<Tensor>>;

#[derive(Debug, Clone, PartialEq)]
pub struct DateModel {
    pub config: DateConfig,
    n_features: usize,
    gen_store: ParamStore,
    generator: Mlp,
    disc_store: ParamStore,
    discriminator: Mlp,
    /// Divisor applied to times before they reach either network.
    time_scale: f64,
    trained: bool,
    pub(crate) optimizers: Option<(AdamState, AdamState)>,
}

fn noise_slots(config: &DateConfig) -> Vec<Option<usize>> {
    let widths: Vec<usize> = config
        .hidden
        .iter()
        .copied()
        .chain(std::iter::once(1))
        .collect();
    let last = widths.len() - 1;
    widths
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            let on = match config.noise_placement {
                NoisePlacement::AllLayers => true,
                NoisePlacement::InputOnly => j == 0,
                NoisePlacement::OutputOnly => j == last,
            };
            on.then(|| config.noise_dim.unwrap_or(w))
        })
        .collect()
}

impl DateModel {
    /// Freshly initialized, untrained networks for `n_features` covariates.
    pub fn new(n_features: usize, config: DateConfig) -> Result<Self> {
        config.validate()?;
        if n_features == 0 {
            return Err(Error::config("data", "dataset has no covariates"));
        }
        let seed = config.train.seed;
        let mut gen_store = ParamStore::tagged(GENERATOR_TAG);
        let generator = Mlp::new(
            &mut gen_store,
            "generator",
            MlpConfig {
                input: n_features + 1,
                hidden: config.hidden.clone(),
                output: 1,
                batch_norm: config.batch_norm,
                keep_prob: config.keep_prob,
                noise: noise_slots(&config),
            },
            &mut substream(seed, Stream::Init, GENERATOR_TAG.into()),
        )?;
        let mut disc_store = ParamStore::tagged(DISCRIMINATOR_TAG);
        let discriminator = Mlp::new(
            &mut disc_store,
            "discriminator",
            MlpConfig {
                input: n_features + 1,
                hidden: config.hidden.clone(),
                output: 1,
                batch_norm: config.batch_norm,
                keep_prob: config.keep_prob,
                noise: vec![None; config.hidden.len() + 1],
            },
            &mut substream(seed, Stream::Init, DISCRIMINATOR_TAG.into()),
        )?;
        Ok(Self {
            config,
            n_features,
            gen_store,
            generator,
            disc_store,
            discriminator,
            time_scale: 1.0,
            trained: false,
            optimizers: None,
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

    pub(crate) fn mark_trained(&mut self) {
        self.trained = true;
    }

    pub fn generator_store(&self) -> &ParamStore {
        &self.gen_store
    }

    pub fn generator_store_mut(&mut self) -> &mut ParamStore {
        &mut self.gen_store
    }

    pub fn discriminator_store(&self) -> &ParamStore {
        &self.disc_store
    }

    pub fn discriminator_store_mut(&mut self) -> &mut ParamStore {
        &mut self.disc_store
    }

    pub(crate) fn stores_mut(&mut self) -> (&mut ParamStore, &mut ParamStore) {
        (&mut self.gen_store, &mut self.disc_store)
    }

    /// Set every generator noise weight to zero, making the generator deterministic.
    pub fn zero_noise_weights(&mut self) {
        let ids: Vec<_> = self
            .generator
            .dense_layers()
            .filter_map(|d| d.noise_weight)
            .collect();
        for id in ids {
            let v = self.gen_store.value_mut(id);
            *v = Tensor::zeros(v.rows(), v.cols());
        }
    }

    pub fn draw_noise(&self, rows: usize, rng: &mut Rng) -> NoiseDraw {
        let dist = self.config.noise_distribution;
        self.generator
            .noise_dims()
            .iter()
            .map(|slot| {
                slot.map(|d| {
                    let data = (0..rows * d)
                        .map(|_| match dist {
                            NoiseDistribution::Uniform01 => rng.random::<f64>(),
                            NoiseDistribution::UniformSym => rng.random_range(-1.0..1.0),
                            NoiseDistribution::StdNormal => rng.sample(StandardNormal),
                        })
                        .collect();
                    Tensor::from_vec(rows, d, data).expect("noise shape")
                })
            })
            .collect()
    }

    fn check_x(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::Shape(format!(
                "expected {} covariates, got {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Generated times on the scaled axis (`rows × 1`, strictly positive).
    pub fn generate(
        &self,
        g: &mut Graph,
        x: &Tensor,
        event: &[bool],
        noise: &NoiseDraw,
        ctx: &mut ForwardCtx,
    ) -> Result<Var> {
        self.check_x(x)?;
        if event.len() != x.rows() {
            return Err(Error::Shape(
                "censoring flags must match covariate rows".into(),
            ));
        }
        let flags = Tensor::column(event.iter().map(|&e| f64::from(u8::from(e))).collect());
        let input = g.input(x.concat_cols(&flags));
        let eps: Vec<Option<Var>> = noise
            .iter()
            .map(|n| n.as_ref().map(|t| g.input(t.clone())))
            .collect();
        let log_t = self
            .generator
            .forward(g, &self.gen_store, input, &eps, ctx)?;
        let t = g.exp(log_t);
        g.check_finite(t, "generated time")?;
        Ok(t)
    }

    /// Discriminator logits for `(x, t_scaled)` pairs.
    pub fn discriminate(
        &self,
        g: &mut Graph,
        x: &Tensor,
        t_scaled: Var,
        ctx: &mut ForwardCtx,
    ) -> Result<Var> {
        self.check_x(x)?;
        let xv = g.input(x.clone());
        let input = g.concat_cols(xv, t_scaled);
        let none = vec![None; self.config.hidden.len() + 1];
        self.discriminator
            .forward(g, &self.disc_store, input, &none, ctx)
    }

    fn scaled_column(&self, t: &[f64]) -> Tensor {
        Tensor::column(t.iter().map(|v| v / self.time_scale).collect())
    }

    /// Discriminator loss on a batch of events, with `fake` generated times
    /// (scaled) held constant.
    pub fn discriminator_objective(
        &self,
        g: &mut Graph,
        x: &Tensor,
        t: &[f64],
        fake: &Tensor,
        ctx: &mut ForwardCtx,
    ) -> Result<Var> {
        let real = g.input(self.scaled_column(t));
        let fake = g.input(fake.clone());
        let both = g.concat_rows(real, fake);
        let logits = self.discriminate(g, &x.concat_rows(x), both, ctx)?;
        let n = x.rows();
        let real_logits = g.gather_rows(logits, &(0..n).collect::<Vec<_>>());
        let fake_logits = g.gather_rows(logits, &(n..2 * n).collect::<Vec<_>>());
        Ok(adversarial_losses(g, real_logits, fake_logits, self.config.gan_loss).0)
    }

    /// Full generator objective `ℓ1 + λ2 ℓ2 + λ3 ℓ3` on a mixed batch.
    pub fn generator_objective(
        &self,
        g: &mut Graph,
        batch: &Batch,
        noise: &NoiseDraw,
        gen_ctx: &mut ForwardCtx,
        disc_ctx: &mut ForwardCtx,
    ) -> Result<GeneratorObjective> {
        let fake = self.generate(g, &batch.x, &batch.event, noise, gen_ctx)?;
        let ev: Vec<usize> = (0..batch.len()).filter(|&i| batch.event[i]).collect();
        let cens: Vec<usize> = (0..batch.len()).filter(|&i| !batch.event[i]).collect();

        let mut parts: Vec<Var> = Vec::new();
        let (mut adversarial, mut censored, mut dist) = (None, None, None);
        if !ev.is_empty() {
            let x_ev = batch.x.select_rows(&ev);
            let t_ev: Vec<f64> = ev.iter().map(|&i| batch.t[i]).collect();
            let fake_ev = g.gather_rows(fake, &ev);
            let real = g.input(self.scaled_column(&t_ev));
            let both = g.concat_rows(real, fake_ev);
            let logits = self.discriminate(g, &x_ev.concat_rows(&x_ev), both, disc_ctx)?;
            let n = ev.len();
            let real_logits = g.gather_rows(logits, &(0..n).collect::<Vec<_>>());
            let fake_logits = g.gather_rows(logits, &(n..2 * n).collect::<Vec<_>>());
            let adv = adversarial_losses(g, real_logits, fake_logits, self.config.gan_loss).1;
            parts.push(adv);
            adversarial = Some(adv);
            let d = distortion(g, real, fake_ev);
            let weighted = g.scale(d, self.config.lambda_distortion);
            parts.push(weighted);
            dist = Some((d, weighted));
        }
        if !cens.is_empty() {
            let t_c: Vec<f64> = cens.iter().map(|&i| batch.t[i]).collect();
            let bound = g.input(self.scaled_column(&t_c));
            let fake_c = g.gather_rows(fake, &cens);
            let h = censored_hinge(g, bound, fake_c);
            let weighted = g.scale(h, self.config.lambda_censored);
            parts.push(weighted);
            censored = Some((h, weighted));
        }
        let mut total = parts[0];
        for &p in &parts[1..] {
            total = g.add(total, p);
        }
        g.check_finite(total, "generator loss")?;
        Ok(GeneratorObjective {
            total,
            adversarial,
            censored,
            distortion: dist,
        })
    }

    fn check_batch(batch: &Batch, want_event: bool, what: &str) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Batch(format!("{what}: empty batch")));
        }
        if batch.event.iter().any(|&e| e != want_event) {
            let kind = if want_event {
                "censored"
            } else {
                "non-censored"
            };
            return Err(Error::Batch(format!(
                "{what}: batch contains {kind} records"
            )));
        }
        Ok(())
    }

    /// `(discriminator loss, generator loss)` on events, inference mode.
    pub fn loss_adversarial(&self, batch: &Batch, noise: &NoiseDraw) -> Result<(f64, f64)> {
        Self::check_batch(batch, true, "adversarial loss")?;
        let mut g = Graph::new();
        let mut ctx = ForwardCtx::inference();
        let fake = self.generate(&mut g, &batch.x, &batch.event, noise, &mut ctx)?;
        let real = g.input(self.scaled_column(&batch.t));
        let both = g.concat_rows(real, fake);
        let logits = self.discriminate(&mut g, &batch.x.concat_rows(&batch.x), both, &mut ctx)?;
        let n = batch.len();
        let r = g.gather_rows(logits, &(0..n).collect::<Vec<_>>());
        let f = g.gather_rows(logits, &(n..2 * n).collect::<Vec<_>>());
        let (d, gl) = adversarial_losses(&mut g, r, f, self.config.gan_loss);
        Ok((g.value(d).item(), g.value(gl).item()))
    }

    /// Mean hinge `max(0, t_c - G)` on censored records, in data time units.
    pub fn loss_censored(&self, batch: &Batch, noise: &NoiseDraw) -> Result<f64> {
        Self::check_batch(batch, false, "censored loss")?;
        let mut g = Graph::new();
        let mut ctx = ForwardCtx::inference();
        let fake = self.generate(&mut g, &batch.x, &batch.event, noise, &mut ctx)?;
        let bound = g.input(self.scaled_column(&batch.t));
        let h = censored_hinge(&mut g, bound, fake);
        Ok(g.value(h).item() * self.time_scale)
    }

    /// Mean `|t - G|` on events, in data time units.
    pub fn loss_distortion(&self, batch: &Batch, noise: &NoiseDraw) -> Result<f64> {
        Self::check_batch(batch, true, "distortion loss")?;
        let mut g = Graph::new();
        let mut ctx = ForwardCtx::inference();
        let fake = self.generate(&mut g, &batch.x, &batch.event, noise, &mut ctx)?;
        let obs = g.input(self.scaled_column(&batch.t));
        let d = distortion(&mut g, obs, fake);
        Ok(g.value(d).item() * self.time_scale)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut cp = Checkpoint::new(
            "date",
            self.config.train.seed,
            serde_json::json!({ "n_features": self.n_features, "model": self.config }),
        );
        cp.time_scale = self.trained.then_some(self.time_scale);
        cp.add_network("generator", &self.gen_store);
        cp.add_network("discriminator", &self.disc_store);
        if let Some((go, d_o)) = &self.optimizers {
            cp.optimizers.insert("generator".into(), go.clone());
            cp.optimizers.insert("discriminator".into(), d_o.clone());
        }
        Ok(cp)
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        cp.expect_model("date")?;
        let n_features = cp.config["n_features"]
            .as_u64()
            .ok_or_else(|| Error::Checkpoint("missing n_features".into()))?
            as usize;
        let config: DateConfig = serde_json::from_value(cp.config["model"].clone())?;
        let mut m = Self::new(n_features, config)?;
        m.gen_store.load(cp.network("generator")?)?;
        m.disc_store.load(cp.network("discriminator")?)?;
        if let Some(s) = cp.time_scale {
            m.set_time_scale(s)?;
            m.trained = true;
        }
        if let (Some(go), Some(d_o)) = (
            cp.optimizers.get("generator"),
            cp.optimizers.get("discriminator"),
        ) {
            m.optimizers = Some((go.clone(), d_o.clone()));
        }
        Ok(m)
    }
}

impl TimeSampler for DateModel {
    fn sample_times(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        if n == 0 {
            return Err(Error::config("eval.samples", "must be at least 1"));
        }
        let row = Tensor::from_vec(1, x.len(), x.to_vec())?;
        self.check_x(&row)?;
        let xs = row.repeat_row(0, n);
        let noise = self.draw_noise(n, rng);
        let mut g = Graph::new();
        let t = self.generate(
            &mut g,
            &xs,
            &vec![true; n],
            &noise,
            &mut ForwardCtx::inference(),
        )?;
        Ok(g.value(t)
            .data()
            .iter()
            .map(|v| (v * self.time_scale).max(f64::MIN_POSITIVE))
            .collect())
    }
}
