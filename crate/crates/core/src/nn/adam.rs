use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                format!("{prefix}learning_rate"),
                "must be positive",
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(
                    format!("{prefix}{name}"),
                    "must lie in [0, 1)",
                ));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config(
                format!("{prefix}epsilon"),
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Bias-corrected Adam moments for every tensor of one [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .params()
            .iter()
            .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Self {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// Apply one update to every trainable tensor. Nothing is modified when
    /// any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if self.first_moment.len() != store.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, store has {}",
                self.first_moment.len(),
                store.len()
            )));
        }
        for (id, g) in grads.iter() {
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(store.get(id).name.clone()));
            }
            if g.shape() != store.value(id).shape() {
                return Err(Error::Shape(format!(
                    "gradient for `{}`",
                    store.get(id).name
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let ids: Vec<_> = store
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(id, _)| id)
            .collect();
        for id in ids {
            let i = id.index();
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            let p = store.value_mut(id).data_mut();
            match grads.get(id) {
                Some(g) => {
                    for (((pk, mk), vk), gk) in p.iter_mut().zip(m).zip(v).zip(g.data()) {
                        *mk = beta1 * *mk + (1.0 - beta1) * gk;
                        *vk = beta2 * *vk + (1.0 - beta2) * gk * gk;
                        *pk -= learning_rate * (*mk / c1) / ((*vk / c2).sqrt() + epsilon);
                    }
                }
                None => {
                    for ((pk, mk), vk) in p.iter_mut().zip(m).zip(v) {
                        *mk *= beta1;
                        *vk *= beta2;
                        *pk -= learning_rate * (*mk / c1) / ((*vk / c2).sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Graph;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(v), true);
        s
    }

    fn grad_of(store: &ParamStore, g: f64) -> Gradients {
        // loss = g * w
        let mut graph = Graph::new();
        let w = graph.param(store, store.find("w").unwrap());
        let l = graph.scale(w, g);
        graph.backward(l).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = scalar_store(0.25);
        let mut adam = AdamState::new(AdamConfig::default(), &s);
        for _ in 0..3 {
            {
                let gr = grad_of(&s, 0.0);
                adam.step(&mut s, &gr)
            }
            .unwrap();
        }
        assert_eq!(s.params()[0].value.item(), 0.25);
    }

    #[test]
    fn first_step_matches_hand_recurrence() {
        // m1 = 0.1, v1 = 0.01, m̂ = 1, v̂ = 1  =>  Δ = lr / (1 + ε)
        let mut s = scalar_store(1.0);
        let mut adam = AdamState::new(AdamConfig::default(), &s);
        {
            let gr = grad_of(&s, 1.0);
            adam.step(&mut s, &gr)
        }
        .unwrap();
        let expected = 1.0 - 3e-4 / (1.0 + 1e-8);
        assert!((s.params()[0].value.item() - expected).abs() < 1e-15);

        // second step with g = 0.5:
        // m2 = 0.9*0.1 + 0.1*0.5 = 0.14, v2 = 0.99*0.01 + 0.01*0.25 = 0.0124
        // m̂ = 0.14/0.19, v̂ = 0.0124/0.0199
        {
            let gr = grad_of(&s, 0.5);
            adam.step(&mut s, &gr)
        }
        .unwrap();
        let mhat: f64 = 0.14 / 0.19;
        let vhat: f64 = 0.0124 / (1.0 - 0.99f64 * 0.99);
        let expected2 = expected - 3e-4 * mhat / (vhat.sqrt() + 1e-8);
        assert!((s.params()[0].value.item() - expected2).abs() < 1e-14);
    }

    #[test]
    fn identical_copies_stay_identical() {
        let mut a = scalar_store(0.3);
        let mut b = scalar_store(0.3);
        let mut sa = AdamState::new(AdamConfig::default(), &a);
        let mut sb = AdamState::new(AdamConfig::default(), &b);
        for k in 0..5 {
            let g = 0.1 * k as f64 - 0.2;
            {
                let gr = grad_of(&a, g);
                sa.step(&mut a, &gr)
            }
            .unwrap();
            {
                let gr = grad_of(&b, g);
                sb.step(&mut b, &gr)
            }
            .unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = scalar_store(1.0);
        let mut adam = AdamState::new(AdamConfig::default(), &s);
        let err = {
            let gr = grad_of(&s, f64::NAN);
            adam.step(&mut s, &gr)
        }
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "w"));
        assert_eq!(s.params()[0].value.item(), 1.0);
        assert_eq!(adam.step, 0);
    }
}
