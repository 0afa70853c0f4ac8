//! Linear Cox proportional-hazards model fitted by penalized Newton ascent on
//! the partial likelihood.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalRecord;
use crate::error::{Error, Result};
use crate::par::{map_slice, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoxConfig {
    /// L2 strength per record: the objective is `ℓ(β) - penalty · n/2 · ‖β‖²`.
    pub penalty: f64,
    pub ties: Ties,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for CoxConfig {
    fn default() -> Self {
        Self {
            penalty: 1e-4,
            ties: Ties::Efron,
            tolerance: 1e-8,
            max_iter: 100,
        }
    }
}

impl CoxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(Error::config(
                "model.penalty",
                "must be finite and nonnegative",
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("model.tolerance", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("model.max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Partial log-likelihood with its analytic gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialLikelihood {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

fn dims(beta: &[f64], records: &[SurvivalRecord]) -> Result<usize> {
    let p = beta.len();
    if let Some(r) = records.iter().find(|r| r.x.len() != p) {
        return Err(Error::Shape(format!(
            "record has {} covariates, β has {p}",
            r.x.len()
        )));
    }
    if !records.iter().any(|r| r.event) {
        return Err(Error::NoEvents("Cox partial likelihood".into()));
    }
    Ok(p)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unpenalized partial log-likelihood. Depends on the times only through their order.
pub fn partial_log_likelihood(
    beta: &[f64],
    records: &[SurvivalRecord],
    ties: Ties,
) -> Result<PartialLikelihood> {
    let p = dims(beta, records)?;
    let eta: Vec<f64> = records.iter().map(|r| dot(&r.x, beta)).collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].t.total_cmp(&records[a].t));

    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut value = 0.0;
    let mut gradient = DVector::zeros(p);
    let mut hessian = DMatrix::zeros(p, p);

    let mut start = 0;
    while start < order.len() {
        let t = records[order[start]].t;
        let mut end = start;
        while end < order.len() && records[order[end]].t == t {
            end += 1;
        }
        let (mut a0, mut a1, mut a2) = (0.0, DVector::zeros(p), DMatrix::zeros(p, p));
        let mut d = 0usize;
        for &i in &order[start..end] {
            let x = DVector::from_column_slice(&records[i].x);
            let xx = &x * x.transpose();
            s0 += w[i];
            s1.axpy(w[i], &x, 1.0);
            s2 += &xx * w[i];
            if records[i].event {
                d += 1;
                a0 += w[i];
                a1.axpy(w[i], &x, 1.0);
                a2 += &xx * w[i];
                value += eta[i];
                gradient += &x;
            }
        }
        for k in 0..d {
            let c = match ties {
                Ties::Efron => k as f64 / d as f64,
                Ties::Breslow => 0.0,
            };
            let phi = s0 - c * a0;
            let phi1 = &s1 - &a1 * c;
            let phi2 = &s2 - &a2 * c;
            value -= phi.ln() + shift;
            gradient -= &phi1 / phi;
            hessian -= &phi2 / phi - (&phi1 * phi1.transpose()) / (phi * phi);
        }
        start = end;
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("partial log-likelihood".into()));
    }
    Ok(PartialLikelihood {
        value,
        gradient,
        hessian,
    })
}

/// Fitted model with convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub beta: Vec<f64>,
    pub config: CoxConfig,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub gradient_max_norm: f64,
}

fn penalized(
    beta: &DVector<f64>,
    records: &[SurvivalRecord],
    config: &CoxConfig,
) -> Result<PartialLikelihood> {
    let mut pl = partial_log_likelihood(beta.as_slice(), records, config.ties)?;
    let lambda = config.penalty * records.len() as f64;
    pl.value -= 0.5 * lambda * beta.norm_squared();
    pl.gradient -= beta * lambda;
    for i in 0..beta.len() {
        pl.hessian[(i, i)] -= lambda;
    }
    Ok(pl)
}

/// Newton ascent with step halving.
pub fn fit(records: &[SurvivalRecord], config: &CoxConfig) -> Result<CoxModel> {
    config.validate()?;
    let p = records
        .first()
        .map(|r| r.x.len())
        .ok_or_else(|| Error::NoEvents("empty training set".into()))?;
    let mut beta = DVector::zeros(p);
    let mut cur = penalized(&beta, records, config)?;
    let mut iterations = 0;
    let mut converged = cur.gradient.amax() < config.tolerance;
    while !converged && iterations < config.max_iter {
        iterations += 1;
        let neg_h = -&cur.hessian;
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&cur.gradient),
            None => {
                return Err(Error::CoxDivergence(format!(
                    "Hessian not negative definite at iteration {iterations}"
                )))
            }
        };
        let mut scale = 1.0;
        let next = loop {
            let cand = &beta + &step * scale;
            match penalized(&cand, records, config) {
                Ok(pl) if pl.value >= cur.value - 1e-12 * cur.value.abs().max(1.0) => {
                    break Some((cand, pl))
                }
                _ => {}
            }
            scale *= 0.5;
            if scale < 1e-10 {
                break None;
            }
        };
        let Some((b, pl)) = next else {
            // Further ascent is below floating-point resolution.
            converged = cur.gradient.amax() < config.tolerance.sqrt();
            break;
        };
        beta = b;
        cur = pl;
        if beta.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::CoxDivergence("coefficients diverged".into()));
        }
        converged = cur.gradient.amax() < config.tolerance;
        log::debug!(
            "cox iteration {iterations}: loglik {:.10} |g| {:.3e}",
            cur.value,
            cur.gradient.amax()
        );
    }
    Ok(CoxModel {
        beta: beta.as_slice().to_vec(),
        config: *config,
        iterations,
        converged,
        log_likelihood: cur.value,
        gradient_max_norm: cur.gradient.amax(),
    })
}

impl CoxModel {
    /// Linear predictor `xᵀβ`; larger means higher hazard.
    pub fn risk_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::Shape(format!(
                "x has {} entries, β has {}",
                x.len(),
                self.beta.len()
            )));
        }
        Ok(dot(x, &self.beta))
    }

    pub fn risk_scores(&self, records: &[SurvivalRecord], exec: Execution) -> Result<Vec<f64>> {
        map_slice(exec, records, |r| self.risk_score(&r.x))
            .into_iter()
            .collect()
    }
}
