//! Independent oracles shared by unit tests.

use crate::error::{Error, Result};
use crate::metrics::RiskOrientation;

/// Harrell's C by enumerating every ordered pair.
pub fn brute_force_ci(
    t: &[f64],
    e: &[bool],
    p: &[f64],
    orientation: RiskOrientation,
) -> Result<f64> {
    let riskier = |a: f64, b: f64| match orientation {
        RiskOrientation::HigherScoreHigherRisk => a > b,
        RiskOrientation::LowerTimeHigherRisk => a < b,
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..t.len() {
        for j in 0..t.len() {
            if e[i] && t[i] < t[j] {
                den += 1.0;
                if p[i] == p[j] {
                    num += 0.5;
                } else if riskier(p[i], p[j]) {
                    num += 1.0;
                }
            }
        }
    }
    if den == 0.0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(num / den)
}

/// Central finite differences of `f` at `x`.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Tied partial likelihood where, at each tied event time, the `k`-th
/// denominator is the mean over every ordering of the tied events of the
/// risk-set weight left after removing the first `k` of them.
pub fn efron_by_ordering(beta: &[f64], records: &[crate::data::SurvivalRecord]) -> f64 {
    let w: Vec<f64> = records
        .iter()
        .map(|r| r.x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>().exp())
        .collect();
    let mut times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut ll = 0.0;
    for t in times {
        let tied: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].event && records[i].t == t)
            .collect();
        let risk: f64 = (0..records.len())
            .filter(|&i| records[i].t >= t)
            .map(|i| w[i])
            .sum();
        let orders = permutations(&tied);
        for &i in &tied {
            ll += w[i].ln();
        }
        for k in 0..tied.len() {
            let avg: f64 = orders
                .iter()
                .map(|o| risk - o[..k].iter().map(|&i| w[i]).sum::<f64>())
                .sum::<f64>()
                / orders.len() as f64;
            ll -= avg.ln();
        }
    }
    ll
}

/// Largest relative gap between `grads` and central differences of `f`
/// over every trainable entry of the store selected by `store`. The
/// denominator is floored at 1e-4 so vanishing gradients compare absolutely.
pub fn fd_max_rel_error<M>(
    model: &mut M,
    store: fn(&mut M) -> &mut crate::nn::ParamStore,
    grads: &crate::nn::Gradients,
    h: f64,
    f: impl Fn(&M) -> f64,
) -> f64 {
    let ids: Vec<_> = store(model)
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    let mut worst = 0.0f64;
    for id in ids {
        let analytic = grads.get_or_zero(store(model), id);
        for k in 0..analytic.len() {
            let orig = store(model).value(id).data()[k];
            store(model).value_mut(id).data_mut()[k] = orig + h;
            let up = f(model);
            store(model).value_mut(id).data_mut()[k] = orig - h;
            let down = f(model);
            store(model).value_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Small mixed-censoring dataset with two covariates and a log-linear time signal.
pub fn toy_dataset(n: usize, seed: u64) -> crate::data::SurvivalDataset {
    use crate::data::{generate_synthetic, Censoring, SplitFractions, SyntheticSpec};
    generate_synthetic(&SyntheticSpec {
        n,
        beta: vec![0.8, -0.5],
        baseline: crate::ParametricSurvival::log_normal(0.0, 0.4).unwrap(),
        censoring: Censoring::Exponential {
            target_fraction: 0.3,
        },
        seed,
        fractions: SplitFractions::default(),
    })
    .unwrap()
}
