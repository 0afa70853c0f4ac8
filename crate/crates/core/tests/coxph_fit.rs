use tte_core::coxph::{fit, partial_log_likelihood, CoxConfig, Ties};
use tte_core::data::{
    generate_synthetic, Censoring, SplitFractions, SurvivalRecord, SyntheticSpec,
};
use tte_core::{Execution, ParametricSurvival};

fn weibull_ph(n: usize, seed: u64) -> Vec<SurvivalRecord> {
    generate_synthetic(&SyntheticSpec {
        n,
        beta: vec![0.7, -0.9, 0.5],
        baseline: ParametricSurvival::weibull(1.5, 10.0).unwrap(),
        censoring: Censoring::Exponential {
            target_fraction: 0.3,
        },
        seed,
        fractions: SplitFractions::default(),
    })
    .unwrap()
    .records
}

#[test]
fn recovers_weibull_proportional_hazards_coefficients() {
    let recs = weibull_ph(3000, 5);
    let model = fit(&recs, &CoxConfig::default()).unwrap();
    assert!(model.converged);
    for (b, h) in [0.7, -0.9, 0.5].iter().zip(&model.beta) {
        assert!(((h - b) / b).abs() < 0.1, "{:?}", model.beta);
    }
}

#[test]
fn breslow_estimate_is_unchanged_by_duplicating_every_record() {
    let recs = weibull_ph(300, 6);
    let doubled: Vec<SurvivalRecord> = recs.iter().chain(&recs).cloned().collect();
    let config = CoxConfig {
        ties: Ties::Breslow,
        ..CoxConfig::default()
    };
    let a = fit(&recs, &config).unwrap();
    let b = fit(&doubled, &config).unwrap();
    for (x, y) in a.beta.iter().zip(&b.beta) {
        assert!((x - y).abs() < 1e-7, "{:?} vs {:?}", a.beta, b.beta);
    }
}

#[test]
fn efron_estimate_moves_little_when_records_are_duplicated() {
    let recs = weibull_ph(300, 7);
    let doubled: Vec<SurvivalRecord> = recs.iter().chain(&recs).cloned().collect();
    let a = fit(&recs, &CoxConfig::default()).unwrap();
    let b = fit(&doubled, &CoxConfig::default()).unwrap();
    for (x, y) in a.beta.iter().zip(&b.beta) {
        assert!(
            (x - y).abs() / x.abs() < 0.05,
            "{:?} vs {:?}",
            a.beta,
            b.beta
        );
    }
}

#[test]
fn gradient_vanishes_at_the_fit() {
    let recs = weibull_ph(500, 8);
    let config = CoxConfig {
        penalty: 0.0,
        ..CoxConfig::default()
    };
    let model = fit(&recs, &config).unwrap();
    let pl = partial_log_likelihood(&model.beta, &recs, Ties::Efron).unwrap();
    assert!(pl.gradient.amax() < 1e-6, "{}", pl.gradient);
    assert!((pl.value - model.log_likelihood).abs() < 1e-9);
}

#[test]
fn risk_scores_agree_across_execution_modes() {
    let recs = weibull_ph(200, 9);
    let model = fit(&recs, &CoxConfig::default()).unwrap();
    let par = model.risk_scores(&recs, Execution::Parallel).unwrap();
    let seq = model.risk_scores(&recs, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
}
