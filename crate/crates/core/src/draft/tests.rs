use proptest::prelude::*;

use super::*;
use crate::data::SurvivalRecord;
use crate::rng::stream;
use crate::stats::{mean, median, normal_cdf, normal_pdf};
use crate::testutil::{fd_max_rel_error, toy_dataset};

fn linear_model(p: usize, variance: VarianceHead) -> DraftModel {
    let config = DraftConfig {
        hidden: vec![],
        variance,
        ..DraftConfig::default()
    };
    let mut m = DraftModel::new(p, config).unwrap();
    m.trained = true;
    m
}

fn set(m: &mut DraftModel, name: &str, v: Vec<f64>) {
    let id = m.store().find(name).unwrap();
    let [r, c] = m.store().value(id).shape();
    *m.store_mut().value_mut(id) = Tensor::from_vec(r, c, v).unwrap();
}

fn batch(rows: &[(f64, f64, bool)]) -> Batch {
    let recs: Vec<SurvivalRecord> = rows
        .iter()
        .map(|&(x, t, e)| SurvivalRecord::new(vec![x], t, e).unwrap())
        .collect();
    Batch::from_records(&recs).unwrap()
}

#[test]
fn mixed_batch_likelihood_matches_direct_evaluation() {
    let mut m = linear_model(1, VarianceHead::Covariate);
    // μ = 0.4 x + 0.2, log σ² = -0.3 x + 0.1
    set(&mut m, "draft.head.weight", vec![0.4, -0.3]);
    set(&mut m, "draft.head.bias", vec![0.2, 0.1]);
    let rows = [
        (0.5, 1.3, true),
        (-1.0, 0.6, false),
        (2.0, 4.0, true),
        (0.3, 2.5, false),
    ];
    let got = m.log_likelihood(&batch(&rows)).unwrap();
    let mut want = 0.0;
    for (x, t, e) in rows {
        let mu = 0.4 * x + 0.2;
        let sigma = ((-0.3 * x + 0.1) / 2.0f64).exp();
        let nu = (t.ln() - mu) / sigma;
        want += if e {
            (normal_pdf(nu) / (sigma * t)).ln()
        } else {
            (1.0 - normal_cdf(nu)).ln()
        };
    }
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn nonpositive_time_is_a_domain_error() {
    let m = linear_model(1, VarianceHead::Covariate);
    let b = Batch {
        x: Tensor::column(vec![0.0]),
        t: vec![0.0],
        event: vec![true],
    };
    assert!(matches!(m.log_likelihood(&b), Err(Error::Domain(_))));
}

#[test]
fn regularizer_matches_pair_enumeration() {
    let mut m = linear_model(1, VarianceHead::Covariate);
    set(&mut m, "draft.head.weight", vec![1.0, 0.0]);
    set(&mut m, "draft.head.bias", vec![0.0, 0.0]);
    // μ equals the covariate
    let rows = [(0.3, 1.0, true), (-0.4, 2.0, false), (1.2, 3.0, true)];
    let got = m.rank_regularizer(&batch(&rows)).unwrap();
    let mut sum = 0.0;
    let mut pairs = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if rows[i].2 && rows[j].1 > rows[i].1 {
                let d = rows[j].0 - rows[i].0;
                sum += 1.0 + (1.0 / (1.0 + (-d).exp())).ln() / 2f64.ln();
                pairs += 1.0;
            }
        }
    }
    assert!((got - sum / pairs).abs() < 1e-14);
    assert_eq!(
        m.rank_regularizer(&batch(&[(0.0, 1.0, false), (1.0, 2.0, false)]))
            .unwrap(),
        0.0
    );
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let data = toy_dataset(40, 9);
    let config = DraftConfig {
        hidden: vec![5],
        ..DraftConfig::default()
    };
    let mut m = DraftModel::new(2, config).unwrap();
    m.set_time_scale(data.t_max()).unwrap();
    assert!(m.store().trainable_count() <= 200);
    let b = data.batch(&(0..12).collect::<Vec<_>>()).unwrap();
    let eval = |m: &DraftModel, grads: bool| {
        let mut g = Graph::new();
        let mut rng = stream(4, Stream::Dropout);
        let obj = m
            .objective(&mut g, &b, &mut ForwardCtx::train(&mut rng))
            .unwrap();
        assert!(obj.rank.is_some());
        (
            g.value(obj.total).item(),
            grads.then(|| g.backward(obj.total).unwrap()),
        )
    };
    let grads = eval(&m, true).1.unwrap();
    let err = fd_max_rel_error(&mut m, DraftModel::store_mut, &grads, 1e-5, |m| {
        eval(m, false).0
    });
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn zero_eta_drops_the_ranking_term() {
    let data = toy_dataset(30, 2);
    let config = DraftConfig {
        hidden: vec![4],
        eta: 0.0,
        ..DraftConfig::default()
    };
    let m = DraftModel::new(2, config).unwrap();
    let b = data.batch(&(0..10).collect::<Vec<_>>()).unwrap();
    let mut g = Graph::new();
    let obj = m
        .objective(&mut g, &b, &mut ForwardCtx::inference())
        .unwrap();
    assert_eq!(obj.total, obj.nll);
}

#[test]
fn sampling_examples() {
    let mut m = linear_model(1, VarianceHead::Constant);
    set(&mut m, "draft.head.weight", vec![0.0]);
    set(&mut m, "draft.head.bias", vec![0.0]);
    set(&mut m, "draft.log_var", vec![0.0]);
    let s = m
        .sample_times(&[0.7], 100_000, &mut stream(1, Stream::Predict))
        .unwrap();
    assert!((median(&s) - 1.0).abs() < 0.02);
    assert!((mean(&s) / 0.5f64.exp() - 1.0).abs() < 0.02);

    let mut tight = DraftModel::new(
        1,
        DraftConfig {
            hidden: vec![],
            variance: VarianceHead::Constant,
            sigma_floor: 1e-300,
            ..DraftConfig::default()
        },
    )
    .unwrap();
    tight.trained = true;
    set(&mut tight, "draft.head.weight", vec![0.5]);
    set(&mut tight, "draft.head.bias", vec![0.25]);
    set(&mut tight, "draft.log_var", vec![-1000.0]);
    let s = tight
        .sample_times(&[1.0], 30, &mut stream(2, Stream::Predict))
        .unwrap();
    assert!(s.iter().all(|&v| v == 0.75f64.exp()));

    let untrained = DraftModel::new(1, DraftConfig::default()).unwrap();
    assert!(matches!(
        untrained.sample_times(&[0.0], 1, &mut stream(0, Stream::Predict)),
        Err(Error::Untrained)
    ));
}

#[test]
fn training_is_deterministic() {
    let data = toy_dataset(200, 4);
    let config = DraftConfig {
        hidden: vec![6],
        train: TrainingConfig {
            epochs: 3,
            batch_size: 50,
            ..TrainingConfig::default()
        },
        ..DraftConfig::default()
    };
    let (a, la) = train(&data, &config).unwrap();
    let (b, lb) = train(&data, &config).unwrap();
    assert_eq!(la, lb);
    let ja = a.to_checkpoint().unwrap().to_json().unwrap();
    assert_eq!(ja, b.to_checkpoint().unwrap().to_json().unwrap());
    let back = DraftModel::from_checkpoint(&Checkpoint::from_json(&ja).unwrap()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn config_validation_names_fields() {
    let bad = DraftConfig {
        eta: -0.1,
        ..DraftConfig::default()
    };
    assert!(bad
        .validate()
        .unwrap_err()
        .to_string()
        .contains("model.eta"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn regularizer_terms_are_bounded_and_monotone(d in -30.0f64..30.0, step in 0.01f64..5.0) {
        let term = |d: f64| {
            let mut g = Graph::new();
            let mu = g.input(Tensor::column(vec![0.0, d]));
            let r = rank_regularizer(&mut g, mu, &[1.0, 2.0], &[true, true]).unwrap();
            g.value(r).item()
        };
        prop_assert!(term(d) <= 1.0);
        prop_assert!(term(d + step) >= term(d));
    }

    #[test]
    fn censored_likelihood_is_monotone_in_location(
        mu in -5.0f64..5.0, step in 0.0f64..3.0, sigma in 0.05f64..3.0, t in 0.01f64..50.0
    ) {
        let eval = |mu: f64| {
            let mut g = Graph::new();
            let m = g.input(Tensor::scalar(mu));
            let s = g.input(Tensor::scalar(sigma));
            let v = lognormal_log_likelihood(&mut g, m, s, &[t.ln()], &[false], LikelihoodForm::TimeDensity).unwrap();
            g.value(v).item()
        };
        prop_assert!(eval(mu + step) >= eval(mu));
    }
}
