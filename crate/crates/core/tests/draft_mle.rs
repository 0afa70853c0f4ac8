//! A linear, constant-variance DRAFT with no ranking term is a censored
//! log-normal regression; training should land on the same maximum found
//! by a derivative-free search over the closed-form likelihood.

use tte_core::data::{FeatureDescriptor, FeatureKind};
use tte_core::data::{Preprocessing, Split, SurvivalDataset, SurvivalRecord};
use tte_core::draft::{train, DraftConfig, VarianceHead};
use tte_core::rng::{stream, Stream};
use tte_core::training::TrainingConfig;

use rand::Rng as _;

fn records() -> Vec<SurvivalRecord> {
    let mut rng = stream(77, Stream::Data);
    (0..20)
        .map(|i| {
            let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let z: f64 = rng.random_range(-1.0..1.0);
            let t = (1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.6 * z).exp();
            SurvivalRecord::new(x, t, i % 4 != 0).unwrap()
        })
        .collect()
}

fn normal_log_sf(z: f64) -> f64 {
    (0.5 * libm::erfc(z / std::f64::consts::SQRT_2)).ln()
}

/// Censored log-normal log-likelihood of `(w1, w2, b, log σ)`, dropping constants.
fn log_likelihood(theta: &[f64], recs: &[SurvivalRecord]) -> f64 {
    let sigma = theta[3].exp();
    recs.iter()
        .map(|r| {
            let mu = theta[0] * r.x[0] + theta[1] * r.x[1] + theta[2];
            let z = (r.t.ln() - mu) / sigma;
            if r.event {
                -0.5 * z * z - sigma.ln()
            } else {
                normal_log_sf(z)
            }
        })
        .sum()
}

fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64]) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += 0.5;
        simplex.push(p);
    }
    for _ in 0..20_000 {
        simplex.sort_by(|a, b| f(a).total_cmp(&f(b)));
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |c: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + c * (simplex[n][j] - centroid[j]))
                .collect()
        };
        let reflected = along(-1.0);
        if f(&reflected) < f(&simplex[0]) {
            let expanded = along(-2.0);
            simplex[n] = if f(&expanded) < f(&reflected) {
                expanded
            } else {
                reflected
            };
        } else if f(&reflected) < f(&simplex[n - 1]) {
            simplex[n] = reflected;
        } else {
            let contracted = along(0.5);
            if f(&contracted) < f(&simplex[n]) {
                simplex[n] = contracted;
            } else {
                let best = simplex[0].clone();
                for p in simplex.iter_mut().skip(1) {
                    for j in 0..n {
                        p[j] = best[j] + 0.5 * (p[j] - best[j]);
                    }
                }
            }
        }
    }
    simplex.sort_by(|a, b| f(a).total_cmp(&f(b)));
    simplex.swap_remove(0)
}

#[test]
fn training_reaches_the_brute_force_maximum_likelihood() {
    let recs = records();
    let theta = nelder_mead(|t| -log_likelihood(t, &recs), &[0.0, 0.0, 0.0, 0.0]);

    let features = ["x0", "x1"]
        .iter()
        .map(|n| FeatureDescriptor {
            name: n.to_string(),
            kind: FeatureKind::Continuous,
            imputation: None,
        })
        .collect();
    let names = vec!["x0".to_string(), "x1".to_string()];
    let ds = SurvivalDataset::new(
        recs.clone(),
        features,
        vec![Split::Train; 20],
        "units",
        Preprocessing::identity(&names),
    )
    .unwrap();
    let config = DraftConfig {
        hidden: vec![],
        eta: 0.0,
        variance: VarianceHead::Constant,
        keep_prob: 1.0,
        train: TrainingConfig {
            seed: 1,
            epochs: 6000,
            batch_size: 20,
            patience: 0,
            learning_rate: 1e-2,
            ..TrainingConfig::default()
        },
        ..DraftConfig::default()
    };
    let (model, _) = train(&ds, &config).unwrap();
    let batch = ds.split_batch(Split::Train).unwrap();
    let (mu, sigma) = model.location_scale(&batch.x).unwrap();
    for (i, r) in recs.iter().enumerate() {
        let expected = theta[0] * r.x[0] + theta[1] * r.x[1] + theta[2];
        assert!(
            (mu[i] - expected).abs() < 1e-3,
            "record {i}: {} vs {expected}",
            mu[i]
        );
    }
    assert!(
        (sigma[0] - theta[3].exp()).abs() < 1e-3,
        "{} vs {}",
        sigma[0],
        theta[3].exp()
    );
}
