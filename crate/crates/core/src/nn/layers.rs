//! Dense, batch-norm and dropout layers and the MLP stack built from them.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::init::xavier_init;
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Per-forward state: mode, the dropout random source, and batch-norm
/// running-statistic updates waiting to be committed.
pub struct ForwardCtx<'a> {
    pub mode: Mode,
    rng: Option<&'a mut Rng>,
    pending: Vec<(ParamId, Tensor)>,
}

impl<'a> ForwardCtx<'a> {
    pub fn train(rng: &'a mut Rng) -> Self {
        Self {
            mode: Mode::Train,
            rng: Some(rng),
            pending: Vec::new(),
        }
    }

    pub fn inference() -> Self {
        Self {
            mode: Mode::Inference,
            rng: None,
            pending: Vec::new(),
        }
    }

    /// Write accumulated running statistics into `store`.
    pub fn commit(self, store: &mut ParamStore) {
        for (id, t) in self.pending {
            *store.value_mut(id) = t;
        }
    }
}

fn check_keep_prob(keep_prob: f64) -> Result<()> {
    if keep_prob > 0.0 && keep_prob <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(
            "keep_prob",
            format!("must lie in (0, 1], got {keep_prob}"),
        ))
    }
}

/// Inverted-dropout mask: each entry is `1/keep_prob` with probability
/// `keep_prob`, else 0.
pub fn dropout_mask(rows: usize, cols: usize, keep_prob: f64, rng: &mut Rng) -> Result<Tensor> {
    check_keep_prob(keep_prob)?;
    let scale = 1.0 / keep_prob;
    let data = (0..rows * cols)
        .map(|_| {
            if rng.random::<f64>() < keep_prob {
                scale
            } else {
                0.0
            }
        })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

/// Inverted dropout on a plain tensor; identity in inference mode or when `keep_prob = 1`.
pub fn dropout(x: &Tensor, keep_prob: f64, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
    check_keep_prob(keep_prob)?;
    if mode == Mode::Inference || keep_prob == 1.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.rows(), x.cols(), keep_prob, rng)?;
    Ok(x.zip_map(&mask, |a, m| a * m))
}

/// Graph version of [`dropout`].
pub fn dropout_var(g: &mut Graph, x: Var, keep_prob: f64, ctx: &mut ForwardCtx) -> Result<Var> {
    check_keep_prob(keep_prob)?;
    if ctx.mode == Mode::Inference || keep_prob == 1.0 {
        return Ok(x);
    }
    let [r, c] = g.value(x).shape();
    let rng = ctx
        .rng
        .as_deref_mut()
        .ok_or_else(|| Error::config("dropout", "train mode requires a random source"))?;
    let mask = dropout_mask(r, c, keep_prob, rng)?;
    let m = g.input(mask);
    Ok(g.mul(x, m))
}

/// Affine map `W h + W_noise ε + b` followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub noise_weight: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub noise_dim: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        noise_dim: Option<usize>,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let weight = store.add(
            format!("{name}.weight"),
            xavier_init(out_dim, in_dim, rng)?,
            true,
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, out_dim), true);
        let noise_weight = match noise_dim {
            Some(d) => Some(store.add(
                format!("{name}.noise_weight"),
                xavier_init(out_dim, d, rng)?,
                true,
            )),
            None => None,
        };
        Ok(Self {
            weight,
            bias,
            noise_weight,
            in_dim,
            out_dim,
            noise_dim: noise_dim.unwrap_or(0),
            activation,
        })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        noise: Option<Var>,
    ) -> Result<Var> {
        let [rows, cols] = g.value(x).shape();
        if cols != self.in_dim {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {cols}",
                self.in_dim
            )));
        }
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let mut z = g.matmul_t(x, w);
        match (self.noise_weight, noise) {
            (Some(nw), Some(eps)) => {
                if g.value(eps).shape() != [rows, self.noise_dim] {
                    return Err(Error::Shape(format!(
                        "noise for this layer must be {rows}x{}, got {:?}",
                        self.noise_dim,
                        g.value(eps).shape()
                    )));
                }
                let nwv = g.param(store, nw);
                let zn = g.matmul_t(eps, nwv);
                z = g.add(z, zn);
            }
            (None, None) => {}
            (Some(_), None) => return Err(Error::Shape("noisy layer called without noise".into())),
            (None, Some(_)) => {
                return Err(Error::Shape("noise passed to a noiseless layer".into()))
            }
        }
        let z = g.add_row(z, b);
        Ok(match self.activation {
            Activation::Relu => g.relu(z),
            Activation::Identity => z,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(1, dim, 1.0), true),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(1, dim), true),
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(1, dim), false),
            running_var: store.add(
                format!("{name}.running_var"),
                Tensor::filled(1, dim, 1.0),
                false,
            ),
            momentum: BATCH_NORM_MOMENTUM,
            eps: BATCH_NORM_EPS,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, ctx: &mut ForwardCtx) -> Var {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        let normalized = match ctx.mode {
            Mode::Train => {
                let n = g.value(x).rows();
                let mean = g.col_mean(x);
                let centered = g.sub_row(x, mean);
                let sq = g.square(centered);
                let var = g.col_mean(sq);
                let shifted = g.add_scalar(var, self.eps);
                let inv_std = g.powf(shifted, -0.5);

                let m = self.momentum;
                let unbias = if n > 1 {
                    n as f64 / (n - 1) as f64
                } else {
                    1.0
                };
                let rm = store
                    .value(self.running_mean)
                    .zip_map(g.value(mean), |r, b| (1.0 - m) * r + m * b);
                let rv = store
                    .value(self.running_var)
                    .zip_map(g.value(var), |r, b| (1.0 - m) * r + m * b * unbias);
                ctx.pending.push((self.running_mean, rm));
                ctx.pending.push((self.running_var, rv));

                g.mul_row(centered, inv_std)
            }
            Mode::Inference => {
                let mean = g.input(store.value(self.running_mean).clone());
                let inv_std = g.input(
                    store
                        .value(self.running_var)
                        .map(|v| 1.0 / (v + self.eps).sqrt()),
                );
                let centered = g.sub_row(x, mean);
                g.mul_row(centered, inv_std)
            }
        };
        let scaled = g.mul_row(normalized, gamma);
        g.add_row(scaled, beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub batch_norm: bool,
    pub keep_prob: f64,
    /// Noise width per affine map (`hidden.len() + 1` entries); `None` = no noise.
    pub noise: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
struct HiddenBlock {
    dense: Dense,
    norm: Option<BatchNorm>,
}

/// Hidden blocks `affine(h, ε) → batch norm → ReLU → dropout`, then a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    blocks: Vec<HiddenBlock>,
    head: Dense,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        config: MlpConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_keep_prob(config.keep_prob)?;
        if config.noise.len() != config.hidden.len() + 1 {
            return Err(Error::Shape(format!(
                "noise spec has {} entries for {} affine maps",
                config.noise.len(),
                config.hidden.len() + 1
            )));
        }
        if config.input == 0 || config.output == 0 || config.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        let mut blocks = Vec::with_capacity(config.hidden.len());
        let mut width = config.input;
        for (j, &h) in config.hidden.iter().enumerate() {
            let dense = Dense::new(
                store,
                &format!("{prefix}.layer{j}"),
                width,
                h,
                config.noise[j],
                Activation::Identity,
                rng,
            )?;
            let norm = config
                .batch_norm
                .then(|| BatchNorm::new(store, &format!("{prefix}.layer{j}.bn"), h));
            blocks.push(HiddenBlock { dense, norm });
            width = h;
        }
        let head = Dense::new(
            store,
            &format!("{prefix}.head"),
            width,
            config.output,
            config.noise[config.hidden.len()],
            Activation::Identity,
            rng,
        )?;
        Ok(Self {
            config,
            blocks,
            head,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    /// Every dense layer, input side first.
    pub fn dense_layers(&self) -> impl Iterator<Item = &Dense> {
        self.blocks
            .iter()
            .map(|b| &b.dense)
            .chain(std::iter::once(&self.head))
    }

    pub fn noise_dims(&self) -> &[Option<usize>] {
        &self.config.noise
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        noise: &[Option<Var>],
        ctx: &mut ForwardCtx,
    ) -> Result<Var> {
        if noise.len() != self.config.noise.len() {
            return Err(Error::Shape(format!(
                "expected {} noise slots, got {}",
                self.config.noise.len(),
                noise.len()
            )));
        }
        let mut h = x;
        for (block, eps) in self.blocks.iter().zip(noise) {
            h = block.dense.forward(g, store, h, *eps)?;
            if let Some(bn) = &block.norm {
                h = bn.forward(g, store, h, ctx);
            }
            h = g.relu(h);
            h = dropout_var(g, h, self.config.keep_prob, ctx)?;
        }
        let out = self.head.forward(g, store, h, noise[self.blocks.len()])?;
        g.check_finite(out, "network output")?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn plain(input: usize, hidden: Vec<usize>, output: usize) -> MlpConfig {
        let n = hidden.len() + 1;
        MlpConfig {
            input,
            hidden,
            output,
            batch_norm: false,
            keep_prob: 1.0,
            noise: vec![None; n],
        }
    }

    #[test]
    fn identity_dense_passes_input_through() {
        let mut store = ParamStore::new();
        let mut rng = stream(1, Stream::Init);
        let d = Dense::new(&mut store, "d", 3, 3, None, Activation::Identity, &mut rng).unwrap();
        *store.value_mut(d.weight) = Tensor::identity(3);
        let x = Tensor::from_rows(&[[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]]).unwrap();
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let y = d.forward(&mut g, &store, xv, None).unwrap();
        assert_eq!(g.value(y), &x);
    }

    #[test]
    fn two_layer_relu_matches_straight_line_arithmetic() {
        let mut store = ParamStore::new();
        let mut rng = stream(21, Stream::Init);
        let mlp = Mlp::new(&mut store, "net", plain(3, vec![4], 2), &mut rng).unwrap();
        let x = Tensor::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]]).unwrap();
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let mut ctx = ForwardCtx::inference();
        let y = mlp
            .forward(&mut g, &store, xv, &[None, None], &mut ctx)
            .unwrap();

        let get = |n: &str| store.value(store.find(n).unwrap()).clone();
        let (w0, b0, w1, b1) = (
            get("net.layer0.weight"),
            get("net.layer0.bias"),
            get("net.head.weight"),
            get("net.head.bias"),
        );
        for r in 0..2 {
            let mut h = [0.0; 4];
            for (i, hi) in h.iter_mut().enumerate() {
                let mut s = b0.get(0, i);
                for k in 0..3 {
                    s += w0.get(i, k) * x.get(r, k);
                }
                *hi = s.max(0.0);
            }
            for o in 0..2 {
                let mut s = b1.get(0, o);
                for (i, hi) in h.iter().enumerate() {
                    s += w1.get(o, i) * hi;
                }
                assert!((g.value(y).get(r, o) - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn input_width_mismatch_is_an_error() {
        let mut store = ParamStore::new();
        let mut rng = stream(2, Stream::Init);
        let mlp = Mlp::new(&mut store, "net", plain(3, vec![2], 1), &mut rng).unwrap();
        let mut g = Graph::new();
        let xv = g.input(Tensor::zeros(2, 4));
        let mut ctx = ForwardCtx::inference();
        assert!(matches!(
            mlp.forward(&mut g, &store, xv, &[None, None], &mut ctx),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn dropout_modes_and_rates() {
        let mut rng = stream(4, Stream::Dropout);
        let x = Tensor::filled(1, 100_000, 1.0);
        assert_eq!(dropout(&x, 1.0, Mode::Train, &mut rng).unwrap(), x);
        assert_eq!(dropout(&x, 0.3, Mode::Inference, &mut rng).unwrap(), x);
        let y = dropout(&x, 0.8, Mode::Train, &mut rng).unwrap();
        let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / 1e5;
        assert!((kept - 0.8).abs() < 0.01, "{kept}");
        let mean = y.sum() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        assert!(dropout(&x, 0.0, Mode::Train, &mut rng).is_err());
        assert!(dropout(&x, 1.2, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn batch_norm_train_statistics() {
        let mut store = ParamStore::new();
        let mut bn = BatchNorm::new(&mut store, "bn", 2);
        bn.eps = 0.0;
        *store.value_mut(bn.gamma) = Tensor::from_rows(&[[2.0, 0.5]]).unwrap();
        *store.value_mut(bn.beta) = Tensor::from_rows(&[[-1.0, 3.0]]).unwrap();
        let x = Tensor::from_rows(&[[1.0, 10.0], [2.0, 30.0], [4.0, 20.0], [7.0, 0.0]]).unwrap();
        let mut rng = stream(0, Stream::Dropout);
        let mut ctx = ForwardCtx::train(&mut rng);
        let mut g = Graph::new();
        let xv = g.input(x);
        let y = bn.forward(&mut g, &store, xv, &mut ctx);
        let y = g.value(y);
        for (c, (gamma, delta)) in [(2.0, -1.0), (0.5, 3.0)].into_iter().enumerate() {
            let col: Vec<f64> = (0..4).map(|r| y.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!((mean - delta).abs() < 1e-6);
            assert!((var - gamma * gamma).abs() < 1e-6);
        }
        let before = store.value(bn.running_mean).clone();
        ctx.commit(&mut store);
        assert_ne!(store.value(bn.running_mean), &before);
    }

    #[test]
    fn batch_norm_inference_uses_frozen_statistics() {
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut store, "bn", 1);
        *store.value_mut(bn.running_mean) = Tensor::scalar(2.0);
        *store.value_mut(bn.running_var) = Tensor::scalar(4.0 - BATCH_NORM_EPS);
        let mut g = Graph::new();
        let xv = g.input(Tensor::column(vec![2.0, 6.0]));
        let mut ctx = ForwardCtx::inference();
        let y = bn.forward(&mut g, &store, xv, &mut ctx);
        assert!((g.value(y).get(0, 0)).abs() < 1e-12);
        assert!((g.value(y).get(1, 0) - 2.0).abs() < 1e-12);
        assert!(ctx.pending.is_empty());
    }
}
