use proptest::prelude::*;

use telescope::regressors::{
    fit, load_model, predict, save_model, FeatureMatrix, Hyperparameters, RegressorError, RegressorKind,
};

fn small_hyper() -> Hyperparameters {
    let mut h = Hyperparameters::default();
    h.forest.trees = 15;
    h.boosting.rounds = 40;
    h
}

fn dataset() -> impl Strategy<Value = FeatureMatrix> {
    (8usize..60, 1usize..4).prop_flat_map(|(rows, cols)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, rows), cols),
            prop::collection::vec(-100.0f64..100.0, rows),
        )
            .prop_map(move |(columns, target)| {
                let names = (0..cols).map(|c| format!("x{c}")).collect();
                FeatureMatrix::new(names, columns, Some(target)).unwrap()
            })
    })
}

fn mse(model: &telescope::regressors::FittedModel, fm: &FeatureMatrix) -> f64 {
    let pred = predict(model, fm).unwrap();
    let y = fm.target().unwrap();
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fits_are_deterministic(fm in dataset(), seed in any::<u64>()) {
        let hyper = small_hyper();
        for kind in RegressorKind::ALL {
            let a = predict(&fit(kind, &fm, seed, &hyper).unwrap(), &fm).unwrap();
            let b = predict(&fit(kind, &fm, seed, &hyper).unwrap(), &fm).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn averaging_learners_stay_within_the_target_range(fm in dataset(), seed in any::<u64>()) {
        let hyper = small_hyper();
        let y = fm.target().unwrap();
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for kind in [RegressorKind::Cart, RegressorKind::RandomForest] {
            for p in predict(&fit(kind, &fm, seed, &hyper).unwrap(), &fm).unwrap() {
                prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn forest_prediction_is_the_tree_mean(fm in dataset(), seed in any::<u64>()) {
        let model = fit(RegressorKind::RandomForest, &fm, seed, &small_hyper()).unwrap();
        for r in 0..fm.rows() {
            let row = fm.row(r);
            let mean = model.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / model.trees.len() as f64;
            prop_assert!((model.predict_row(&row) - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        }
    }

    #[test]
    fn boosting_training_loss_does_not_increase(fm in dataset()) {
        let mut hyper = small_hyper();
        let mut last = f64::INFINITY;
        for rounds in [0, 1, 5, 20, 60] {
            hyper.boosting.rounds = rounds;
            let loss = mse(&fit(RegressorKind::GradientBoosting, &fm, 0, &hyper).unwrap(), &fm);
            prop_assert!(loss <= last + 1e-9 * (1.0 + last.abs()), "rounds {rounds}: {loss} > {last}");
            last = loss;
        }
    }

    #[test]
    fn persistence_round_trips(fm in dataset(), seed in any::<u64>()) {
        for kind in RegressorKind::ALL {
            let model = fit(kind, &fm, seed, &small_hyper()).unwrap();
            let back = load_model(&save_model(&model)).unwrap();
            prop_assert_eq!(predict(&back, &fm).unwrap(), predict(&model, &fm).unwrap());
            prop_assert_eq!(back.seed(), seed);
        }
    }
}

#[test]
fn schema_mismatch_is_rejected() {
    let train = FeatureMatrix::new(
        vec!["a".into()],
        vec![(0..10).map(f64::from).collect()],
        Some((0..10).map(f64::from).collect()),
    )
    .unwrap();
    let model = fit(RegressorKind::Cart, &train, 0, &Hyperparameters::default()).unwrap();
    let other = FeatureMatrix::new(vec!["b".into()], vec![vec![1.0]], None).unwrap();
    assert!(matches!(
        predict(&model, &other),
        Err(RegressorError::SchemaMismatch { .. })
    ));
}

#[test]
fn step_function_is_recovered_by_every_learner() {
    let x: Vec<f64> = (0..60).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| if *v < 30.0 { 2.0 } else { 8.0 }).collect();
    let fm = FeatureMatrix::new(vec!["x".into()], vec![x], Some(y.clone())).unwrap();
    for kind in RegressorKind::ALL {
        let pred = predict(&fit(kind, &fm, 1, &Hyperparameters::default()).unwrap(), &fm).unwrap();
        // bootstrap samples may move a forest's threshold next to the step
        let worst = (0..60)
            .filter(|r| !(28..32).contains(r))
            .map(|r| (pred[r] - y[r]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.5, "{kind}: {worst}");
    }
}
