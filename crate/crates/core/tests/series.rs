use proptest::prelude::*;

use telescope::series::{
    boxcox, estimate_lambda_guerrero, inv_boxcox, parse_csv, shift_positive, to_csv, TimeSeries, GUERRERO_GRID_POINTS,
};

fn positive_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..1e4, 2..120)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Grid argmin of the coefficient of variation of `sd / mean^(1 - λ)` over
/// the trailing complete blocks.
fn brute_force_lambda(values: &[f64], block: usize) -> f64 {
    let skip = values.len() % block;
    let stats: Vec<(f64, f64)> = values[skip..].chunks(block).map(mean_sd).collect();
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 0..GUERRERO_GRID_POINTS {
        let lambda = 2.0 * i as f64 / (GUERRERO_GRID_POINTS - 1) as f64;
        let ratios: Vec<f64> = stats.iter().map(|(m, s)| s / m.powf(1.0 - lambda)).collect();
        let (m, s) = mean_sd(&ratios);
        if s / m < best.1 {
            best = (lambda, s / m);
        }
    }
    best.0
}

#[test]
fn near_constant_series_keeps_lambda_near_one() {
    let values: Vec<f64> = [10.0, 10.1, 9.9].iter().cycle().take(24).copied().collect();
    let lambda = estimate_lambda_guerrero(&TimeSeries::new(values.clone()).unwrap(), 4);
    assert_eq!(lambda, brute_force_lambda(&values, 4));
    assert!((lambda - 1.0).abs() <= 0.05, "lambda {lambda}");
}

#[test]
fn variance_growing_with_level_prefers_log() {
    // multiplicative season: sd proportional to the level
    let values: Vec<f64> = (0..96)
        .map(|t| (5.0 + t as f64) * (1.0 + 0.3 * (t as f64 * std::f64::consts::PI / 6.0).sin()))
        .collect();
    let lambda = estimate_lambda_guerrero(&TimeSeries::new(values.clone()).unwrap(), 12);
    assert_eq!(lambda, brute_force_lambda(&values, 12));
    assert!(lambda < 0.2, "lambda {lambda}");
}

#[test]
fn too_few_blocks_fall_back_to_identity() {
    let s = TimeSeries::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert_eq!(estimate_lambda_guerrero(&s, 4), 1.0);
}

proptest! {
    #[test]
    fn boxcox_round_trip(values in positive_values(), lambda in prop::sample::select(vec![0.0, 0.25, 0.5, 1.0, 2.0])) {
        let s = TimeSeries::new(values).unwrap();
        let back = inv_boxcox(&boxcox(&s, lambda).unwrap(), lambda);
        for (x, y) in s.values().iter().zip(back.values()) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn boxcox_is_monotone(values in positive_values(), lambda in 0.0f64..2.0) {
        let s = TimeSeries::new(values).unwrap();
        let w = boxcox(&s, lambda).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                if s.values()[i] < s.values()[j] {
                    prop_assert!(w.values()[i] <= w.values()[j]);
                }
            }
        }
    }

    #[test]
    fn shift_makes_minimum_one_or_leaves_positive_series(values in prop::collection::vec(-1e3f64..1e3, 1..80)) {
        let s = TimeSeries::new(values).unwrap();
        let (shifted, c) = shift_positive(&s);
        if s.min() > 0.0 {
            prop_assert_eq!(c, 0.0);
            prop_assert_eq!(&shifted, &s);
        } else {
            prop_assert!((shifted.min() - 1.0).abs() < 1e-9);
            for (a, b) in s.values().iter().zip(shifted.values()) {
                prop_assert!((b - c - a).abs() <= 1e-12 * (1.0 + a.abs() + c));
            }
        }
    }

    #[test]
    fn lambda_is_in_range_and_deterministic(values in positive_values(), freq in 1usize..12) {
        let s = TimeSeries::new(values).unwrap();
        let a = estimate_lambda_guerrero(&s, freq);
        prop_assert!((0.0..=2.0).contains(&a));
        prop_assert_eq!(a, estimate_lambda_guerrero(&s, freq));
    }

    #[test]
    fn csv_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let back = parse_csv(&to_csv(&values)).unwrap();
        prop_assert_eq!(back.values(), values.as_slice());
    }
}
