use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor, Var};
use crate::stats::LN_SQRT_2PI;

/// Form of the event term in the log-normal likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodForm {
    /// Density of `t`: `log φ(ν) - log σ - log t`.
    #[default]
    TimeDensity,
    /// Standard normal density of the residual alone, `log φ(ν)`.
    Printed,
}

/// Summed log-normal AFT log-likelihood with `ν = (log t - μ) / σ`. Events
/// contribute the density term, censored records `log(1 - Φ(ν))`.
pub fn lognormal_log_likelihood(
    g: &mut Graph,
    mu: Var,
    sigma: Var,
    log_t: &[f64],
    event: &[bool],
    form: LikelihoodForm,
) -> Result<Var> {
    let n = log_t.len();
    if event.len() != n || g.value(mu).shape() != [n, 1] || g.value(sigma).shape() != [n, 1] {
        return Err(Error::Shape(
            "μ, σ, times and flags must all have one row per record".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Batch("empty batch".into()));
    }
    let lt = g.input(Tensor::column(log_t.to_vec()));
    let resid = g.sub(lt, mu);
    let nu = g.div(resid, sigma);
    let ev: Vec<usize> = (0..n).filter(|&i| event[i]).collect();
    let cens: Vec<usize> = (0..n).filter(|&i| !event[i]).collect();

    let mut total: Option<Var> = None;
    let mut push = |g: &mut Graph, v: Var| {
        total = Some(match total {
            Some(t) => g.add(t, v),
            None => v,
        });
    };
    if !ev.is_empty() {
        let nu_e = g.gather_rows(nu, &ev);
        let sq = g.square(nu_e);
        let half = g.scale(sq, -0.5);
        let mut term = g.sum(half);
        term = g.add_scalar(term, -LN_SQRT_2PI * ev.len() as f64);
        if form == LikelihoodForm::TimeDensity {
            let s_e = g.gather_rows(sigma, &ev);
            let ls = g.ln(s_e);
            let sls = g.sum(ls);
            term = g.sub(term, sls);
            let sum_lt: f64 = ev.iter().map(|&i| log_t[i]).sum();
            term = g.add_scalar(term, -sum_lt);
        }
        push(g, term);
    }
    if !cens.is_empty() {
        let nu_c = g.gather_rows(nu, &cens);
        let lsf = g.normal_log_sf(nu_c);
        let term = g.sum(lsf);
        push(g, term);
    }
    let total = total.expect("nonempty batch");
    g.check_finite(total, "log-likelihood")?;
    Ok(total)
}

/// Comparable pairs `(i, j)`: `i` an event and `t_j > t_i`.
pub fn comparable_pairs(t: &[f64], event: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut is = Vec::new();
    let mut js = Vec::new();
    for i in 0..t.len() {
        if !event[i] {
            continue;
        }
        for j in 0..t.len() {
            if t[j] > t[i] {
                is.push(i);
                js.push(j);
            }
        }
    }
    (is, js)
}

/// Differentiable concordance lower bound: mean over comparable pairs of
/// `1 + log σ(μ_j - μ_i) / log 2`. `None` when there are no comparable pairs.
pub fn rank_regularizer(g: &mut Graph, mu: Var, t: &[f64], event: &[bool]) -> Option<Var> {
    let (is, js) = comparable_pairs(t, event);
    if is.is_empty() {
        return None;
    }
    let mi = g.gather_rows(mu, &is);
    let mj = g.gather_rows(mu, &js);
    let diff = g.sub(mj, mi);
    let ls = g.log_sigmoid(diff);
    let scaled = g.scale(ls, std::f64::consts::LOG2_E);
    let terms = g.add_scalar(scaled, 1.0);
    Some(g.mean(terms))
}
