use rand::Rng as _;

use tte_core::data::{generate_synthetic, Censoring, Split, SplitFractions, SyntheticSpec};
use tte_core::metrics::{concordance_index, MetricReport, RiskOrientation};
use tte_core::predict::prediction_set;
use tte_core::rng::{stream, Rng, Stream};
use tte_core::{Execution, ParametricSurvival, TimeSampler};

fn brute_force(t: &[f64], e: &[bool], p: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..t.len() {
        for j in 0..t.len() {
            if e[i] && t[i] < t[j] {
                den += 1.0;
                num += if p[i] > p[j] {
                    1.0
                } else if p[i] == p[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

#[test]
fn concordance_matches_pair_enumeration_on_random_instances() {
    let mut rng = stream(3, Stream::Data);
    let mut seen = 0;
    while seen < 1000 {
        let n = rng.random_range(2..=40);
        let t: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..12) as f64 + 0.5)
            .collect();
        let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64).collect();
        let Some(expected) = brute_force(&t, &e, &p) else {
            continue;
        };
        seen += 1;
        let got = concordance_index(&t, &e, &p, RiskOrientation::HigherScoreHigherRisk).unwrap();
        assert_eq!(got, expected);
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        assert_eq!(
            concordance_index(&t, &e, &neg, RiskOrientation::LowerTimeHigherRisk).unwrap(),
            expected
        );
    }
}

/// Samples from the generating distribution itself.
struct TrueModel(SyntheticSpec);

impl TimeSampler for TrueModel {
    fn sample_times(&self, x: &[f64], n: usize, rng: &mut Rng) -> tte_core::Result<Vec<f64>> {
        let d = self.0.conditional(x)?;
        Ok((0..n).map(|_| d.sample(rng)).collect())
    }
}

#[test]
fn true_model_intervals_cover_at_nominal_rate() {
    let spec = SyntheticSpec {
        n: 5000,
        beta: vec![0.6, -0.3],
        baseline: ParametricSurvival::log_normal(1.0, 0.7).unwrap(),
        censoring: Censoring::None,
        seed: 4,
        fractions: SplitFractions::default(),
    };
    let ds = generate_synthetic(&spec).unwrap();
    let test = ds.split_records(Split::Test);
    let set = prediction_set(
        &TrueModel(spec),
        &test,
        400,
        5,
        ds.t_max(),
        Execution::Parallel,
    )
    .unwrap();
    let report = MetricReport::from_predictions("oracle", &set, 0.95, Execution::Parallel).unwrap();
    let cov = report.coverage_fraction.unwrap();
    // 1000 test records: binomial sd is about 0.007.
    assert!((cov - 0.95).abs() < 0.025, "coverage {cov}");
    assert!(report.ci > 0.6);
    assert_eq!(report.n_events, report.n_records);
    assert!(report.interval_width_median_censored.is_none());
}

#[test]
fn report_json_is_stable_across_execution_modes() {
    let spec = SyntheticSpec {
        n: 600,
        beta: vec![0.6, -0.3],
        baseline: ParametricSurvival::exponential(0.2).unwrap(),
        censoring: Censoring::Exponential {
            target_fraction: 0.4,
        },
        seed: 8,
        fractions: SplitFractions::default(),
    };
    let ds = generate_synthetic(&spec).unwrap();
    let test = ds.split_records(Split::Test);
    let model = TrueModel(spec);
    let json = |exec| {
        let set = prediction_set(&model, &test, 50, 9, ds.t_max(), exec).unwrap();
        MetricReport::from_predictions("oracle", &set, 0.9, exec)
            .unwrap()
            .to_json()
            .unwrap()
    };
    let par = json(Execution::Parallel);
    assert_eq!(par, json(Execution::Sequential));
    let parsed: MetricReport = serde_json::from_str(&par).unwrap();
    assert_eq!(parsed.to_json().unwrap(), par);
}
