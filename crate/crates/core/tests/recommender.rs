use std::f64::consts::PI;

use proptest::prelude::*;

use telescope::config::TelescopeConfig;
use telescope::recommender::{
    argmin_kind, extract_meta_attributes, generate_series, recommend, train, DegradationVector, RecommenderModel,
};
use telescope::regressors::RegressorKind;
use telescope::series::TimeSeries;
use telescope::spectral::SpectralConfig;
use telescope::synthetic;

fn errors() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1e3, 3)
}

proptest! {
    #[test]
    fn theta_minimum_is_one_and_scale_free(eps in errors(), c in 1e-2f64..1e2) {
        let methods = RegressorKind::ALL.to_vec();
        let a = DegradationVector::from_errors(methods.clone(), &eps);
        prop_assert_eq!(a.theta.iter().copied().fold(f64::INFINITY, f64::min), 1.0);
        prop_assert!(a.theta.iter().all(|t| *t >= 1.0));
        let scaled: Vec<f64> = eps.iter().map(|e| e * c).collect();
        let b = DegradationVector::from_errors(methods, &scaled);
        for (x, y) in a.theta.iter().zip(&b.theta) {
            prop_assert!((x - y).abs() <= 1e-12 * x);
        }
        prop_assert_eq!(a.best(), b.best());
    }

    #[test]
    fn argmin_ignores_monotone_transforms(scores in prop::collection::vec(0.5f64..100.0, 3)) {
        let kinds = RegressorKind::ALL;
        let raw = argmin_kind(kinds.iter().copied().zip(scores.iter().copied()));
        let logged = argmin_kind(kinds.iter().copied().zip(scores.iter().map(|s| s.ln())));
        let cubed = argmin_kind(kinds.iter().copied().zip(scores.iter().map(|s| s.powi(3) + 7.0)));
        prop_assert_eq!(raw, logged);
        prop_assert_eq!(raw, cubed);
    }

    #[test]
    fn failed_learners_take_the_worst_error(eps in errors(), failed in 0usize..3) {
        let mut with_failure = eps.clone();
        with_failure[failed] = f64::NAN;
        let worst = (0..3).filter(|&i| i != failed).map(|i| eps[i]).fold(f64::NEG_INFINITY, f64::max);
        let d = DegradationVector::from_errors(RegressorKind::ALL.to_vec(), &with_failure);
        prop_assert_eq!(d.epsilon[failed], worst);
    }

    #[test]
    fn spectral_attributes_ignore_affine_rescaling(
        period in prop::sample::select(vec![7usize, 12, 24]),
        cycles in 6usize..10,
        a in 0.1f64..50.0,
        b in -100.0f64..100.0,
    ) {
        let x: Vec<f64> = (0..period * cycles)
            .map(|t| {
                let w = 2.0 * PI * t as f64 / period as f64;
                w.sin() + 0.3 * (3.0 * w).cos() + 0.05 * ((t * 7919) % 13) as f64 / 13.0
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let spectral = SpectralConfig::default();
        let p = extract_meta_attributes(&x, &spectral);
        let q = extract_meta_attributes(&y, &spectral);
        prop_assert_eq!(p.s1_frequency, q.s1_frequency);
        prop_assert_eq!(p.s2_length, q.s2_length);
        prop_assert_eq!(p.l1_second_frequency, q.l1_second_frequency);
        prop_assert_eq!(p.l2_third_frequency, q.l2_third_frequency);
        prop_assert_eq!(p.l4_peak_count, q.l4_peak_count);
    }
}

#[test]
fn generated_series_are_valid_and_reproducible() {
    let corpus: Vec<TimeSeries> = synthetic::corpus(5, 4).into_iter().map(|s| s.noisy).collect();
    let spectral = SpectralConfig::default();
    let a = generate_series(&corpus, 12, 9, &spectral).unwrap();
    assert_eq!(a.len(), 12);
    assert_eq!(a, generate_series(&corpus, 12, 9, &spectral).unwrap());
    let longest = corpus.iter().map(TimeSeries::len).max().unwrap();
    for s in &a {
        assert!(s.len() >= 2 && s.len() <= longest);
        assert!(s.values().iter().all(|v| v.is_finite()));
    }
    assert!(generate_series(&[], 3, 0, &spectral).is_err());
}

#[test]
fn trained_model_survives_json_and_recommends_consistently() {
    let config = TelescopeConfig::default();
    let corpus: Vec<TimeSeries> = synthetic::corpus(6, 5).into_iter().map(|s| s.noisy).collect();
    let model = train(&corpus, 8, 2, &config).unwrap();
    assert_eq!(model.provenance.rows, 8);
    assert_eq!(model.methods.len(), 3);
    let back = RecommenderModel::from_json(&model.to_json()).unwrap();
    assert_eq!(back, model);
    for s in &corpus {
        assert_eq!(
            recommend(Some(&model), s, &config).unwrap(),
            recommend(Some(&back), s, &config).unwrap()
        );
    }
    assert!(recommend(None, &corpus[0], &config).is_err());
}
