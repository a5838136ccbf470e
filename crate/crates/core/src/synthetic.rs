//! Seeded trend + season + noise generators for examples and tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;

pub const PERIODS: [usize; 3] = [7, 12, 24];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub length: usize,
    pub period: usize,
    pub level: f64,
    pub slope: f64,
    pub amplitude: f64,
    /// Noise standard deviation as a fraction of `amplitude`.
    pub noise_ratio: f64,
    /// Phase offset of the seasonal shape, in radians.
    pub phase: f64,
}

impl SyntheticSpec {
    /// Noise-free value at time `t`: linear trend plus a two-harmonic season.
    pub fn clean_value(&self, t: usize) -> f64 {
        let x = 2.0 * PI * t as f64 / self.period as f64 + self.phase;
        self.level + self.slope * t as f64 + self.amplitude * (0.8 * x.sin() + 0.2 * (2.0 * x).cos())
    }

    pub fn clean(&self, len: usize) -> Vec<f64> {
        (0..len).map(|t| self.clean_value(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub spec: SyntheticSpec,
    pub clean: Vec<f64>,
    pub noisy: TimeSeries,
}

/// Random spec: length 200–400, period from `PERIODS`, level 50–200,
/// amplitude 5–20% of the level, noise sd at most 10% of the amplitude.
pub fn random_spec(rng: &mut impl Rng) -> SyntheticSpec {
    let level = rng.random_range(50.0..200.0);
    SyntheticSpec {
        length: rng.random_range(200..=400),
        period: PERIODS[rng.random_range(0..PERIODS.len())],
        level,
        slope: rng.random_range(-0.05..0.15) * level / 100.0,
        amplitude: rng.random_range(0.05..0.2) * level,
        noise_ratio: rng.random_range(0.02..=0.1),
        phase: rng.random_range(0.0..2.0 * PI),
    }
}

pub fn realise(spec: SyntheticSpec, rng: &mut impl Rng) -> SyntheticSeries {
    let noise = Normal::new(0.0, spec.noise_ratio * spec.amplitude).expect("valid noise sd");
    let clean = spec.clean(spec.length);
    let noisy = clean.iter().map(|c| c + noise.sample(rng)).collect();
    SyntheticSeries {
        spec,
        clean,
        noisy: TimeSeries::new(noisy).expect("finite synthetic values"),
    }
}

/// `count` seeded series; the same seed always yields the same corpus.
pub fn corpus(count: usize, seed: u64) -> Vec<SyntheticSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let spec = random_spec(&mut rng);
            realise(spec, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible_and_bounded() {
        let a = corpus(20, 3);
        assert_eq!(a, corpus(20, 3));
        for s in &a {
            assert!((200..=400).contains(&s.noisy.len()));
            assert!(s.spec.noise_ratio <= 0.1);
            assert!(PERIODS.contains(&s.spec.period));
            assert!(s.noisy.min() > 0.0);
        }
    }
}
