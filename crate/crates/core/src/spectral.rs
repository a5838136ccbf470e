//! Periodogram and dominant seasonal period detection.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("periodogram needs at least 4 observations, got {0}")]
    TooShort(usize),
}

/// Power at the Fourier frequencies `k/n`, `k = 1..=floor(n/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

impl Periodogram {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn max_power(&self) -> f64 {
        self.power.iter().copied().fold(0.0, f64::max)
    }

    /// Indices of local maxima (ties with a neighbour count as a peak).
    pub fn peak_indices(&self) -> Vec<usize> {
        let p = &self.power;
        (0..p.len())
            .filter(|&i| {
                let left = i == 0 || p[i] >= p[i - 1];
                let right = i + 1 == p.len() || p[i] >= p[i + 1];
                left && right
            })
            .collect()
    }

    /// Number of local maxima whose power is at least `fraction` of the max.
    pub fn strong_peak_count(&self, fraction: f64) -> usize {
        let max = self.max_power();
        if max <= 0.0 {
            return 1;
        }
        self.peak_indices()
            .into_iter()
            .filter(|&i| self.power[i] >= fraction * max)
            .count()
            .max(1)
    }
}

/// Dominant seasonal periods, strongest first. `[1]` means non-seasonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub periods: Vec<usize>,
}

impl FrequencySet {
    pub fn non_seasonal() -> Self {
        Self { periods: vec![1] }
    }

    pub fn is_seasonal(&self) -> bool {
        self.dominant() > 1
    }

    pub fn dominant(&self) -> usize {
        self.periods.first().copied().unwrap_or(1)
    }

    /// The `rank`-th period (0 = dominant), 1 when absent.
    pub fn nth_or_one(&self, rank: usize) -> usize {
        if !self.is_seasonal() {
            return 1;
        }
        self.periods.get(rank).copied().unwrap_or(1)
    }
}

/// Thresholds of the seasonality test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// A peak qualifies when its power is at least this fraction of the max.
    pub peak_fraction: f64,
    /// Minimum ratio of the maximum bin power to the median bin power.
    pub median_ratio: f64,
    /// Target false-alarm rate for white noise; raises the median ratio on
    /// long series where the largest of many noise bins grows with `ln(bins)`.
    pub false_alarm: f64,
    pub max_count: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            peak_fraction: 0.5,
            median_ratio: 10.0,
            false_alarm: 0.01,
            max_count: 3,
        }
    }
}

impl SpectralConfig {
    /// Effective max/median ratio for a periodogram with `bins` ordinates.
    ///
    /// White-noise ordinates are roughly exponential, so the median sits at
    /// `ln 2` times the mean and `P(max > c·mean) ≈ bins·e^(-c)`.
    pub fn noise_guard(&self, bins: usize) -> f64 {
        if self.false_alarm <= 0.0 || bins == 0 {
            return self.median_ratio;
        }
        let c = (bins as f64 / self.false_alarm).ln();
        self.median_ratio.max(c / std::f64::consts::LN_2)
    }
}

fn raw_periodogram(centered: &[f64]) -> Periodogram {
    let n = centered.len();
    let mut buf: Vec<Complex<f64>> = centered.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let frequencies = (1..=half).map(|k| k as f64 / n as f64).collect();
    let power = (1..=half).map(|k| buf[k].norm_sqr() / n as f64).collect();
    Periodogram { frequencies, power }
}

/// Classical periodogram of the mean-removed series: `|X_k|² / n`.
pub fn periodogram(series: &TimeSeries) -> Result<Periodogram, SpectralError> {
    let values = series.values();
    if values.len() < 4 {
        return Err(SpectralError::TooShort(values.len()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    Ok(raw_periodogram(&centered))
}

/// Residuals of the least-squares line through `(t, values[t])`.
pub fn remove_linear_trend(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, &y) in values.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    values
        .iter()
        .enumerate()
        .map(|(t, &y)| y - y_mean - slope * (t as f64 - t_mean))
        .collect()
}

/// Periodogram of the linearly detrended series, as used for detection.
pub fn detection_periodogram(values: &[f64]) -> Option<Periodogram> {
    if values.len() < 4 {
        return None;
    }
    Some(raw_periodogram(&remove_linear_trend(values)))
}

fn power_at_period(centered: &[f64], period: usize) -> f64 {
    let w = 2.0 * std::f64::consts::PI / period as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (t, &v) in centered.iter().enumerate() {
        let phase = w * (t % period) as f64;
        re += v * phase.cos();
        im -= v * phase.sin();
    }
    (re * re + im * im) / centered.len() as f64
}

/// Integer period with maximal power among periods whose frequency lies
/// strictly between the neighbouring Fourier bins of bin `k`.
fn refine_period(centered: &[f64], k: usize, max_period: usize) -> usize {
    let n = centered.len() as f64;
    let nearest = (n / k as f64).round() as usize;
    let lo = ((n / (k as f64 + 1.0)).floor() as usize + 1).max(2);
    let hi = if k > 1 {
        ((n / (k as f64 - 1.0)).ceil() as usize - 1).min(max_period)
    } else {
        max_period
    };
    if lo > hi {
        return nearest;
    }
    let mut best = (nearest, f64::NEG_INFINITY);
    for p in lo..=hi {
        let power = power_at_period(centered, p);
        if power > best.1 * (1.0 + 1e-12) {
            best = (p, power);
        }
    }
    best.0
}

/// Dominant periods of the series, strongest first, or `[1]`.
///
/// A linear trend is removed before the periodogram. A bin is a candidate
/// when it is a local maximum with at least `peak_fraction` of the maximal
/// power among admissible bins (periods `2..=n/2`); the series counts as
/// seasonal only when that maximum also clears the noise guard relative to
/// the median bin power. Candidate periods are snapped to the integer
/// period with the most power near the bin, deduplicated, and truncated to
/// `config.max_count`.
pub fn dominant_frequencies(series: &TimeSeries, config: &SpectralConfig) -> FrequencySet {
    let values = series.values();
    let n = values.len();
    let max_period = n / 2;
    let Some(pg) = detection_periodogram(values) else {
        return FrequencySet::non_seasonal();
    };
    if max_period < 2 || config.max_count == 0 {
        return FrequencySet::non_seasonal();
    }
    let admissible = |k: usize| {
        let period = (n as f64 / k as f64).round() as usize;
        (2..=max_period).contains(&period)
    };
    let admissible_max = (1..=pg.len())
        .filter(|&k| admissible(k))
        .map(|k| pg.power[k - 1])
        .fold(0.0, f64::max);
    let mut sorted = pg.power.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    if admissible_max <= 0.0 || admissible_max < config.noise_guard(pg.len()) * median {
        return FrequencySet::non_seasonal();
    }

    let mut candidates: Vec<(usize, f64)> = pg
        .peak_indices()
        .into_iter()
        .map(|i| (i + 1, pg.power[i]))
        .filter(|&(k, p)| admissible(k) && p >= config.peak_fraction * admissible_max)
        .collect();
    // strongest first; ties favour the longer period (lower bin)
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let centered = remove_linear_trend(values);
    let mut periods: Vec<usize> = Vec::new();
    for (k, _) in candidates {
        let period = refine_period(&centered, k, max_period);
        if (2..=max_period).contains(&period) && !periods.contains(&period) {
            periods.push(period);
        }
        if periods.len() == config.max_count {
            break;
        }
    }
    if periods.is_empty() {
        FrequencySet::non_seasonal()
    } else {
        FrequencySet { periods }
    }
}

/// Two-column `frequency,power` CSV.
pub fn periodogram_csv(pg: &Periodogram) -> String {
    let mut out = String::from("frequency,power\n");
    for (f, p) in pg.frequencies.iter().zip(&pg.power) {
        out.push_str(&format!("{f},{p}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v).unwrap()
    }

    /// O(n²) DFT of the mean-removed series.
    fn dft_oracle(values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        (1..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in values.iter().enumerate() {
                    let a = 2.0 * PI * (k * t) as f64 / n as f64;
                    re += (v - mean) * a.cos();
                    im -= (v - mean) * a.sin();
                }
                (re * re + im * im) / n as f64
            })
            .collect()
    }

    fn sine(period: f64, n: usize) -> Vec<f64> {
        (0..n).map(|t| (2.0 * PI * t as f64 / period).sin()).collect()
    }

    fn argmax(v: &[f64]) -> usize {
        (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
    }

    #[test]
    fn sine_peak_matches_dft_oracle() {
        let v = sine(12.0, 120);
        let pg = periodogram(&ts(v.clone())).unwrap();
        let oracle = dft_oracle(&v);
        for (a, b) in pg.power.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b));
        }
        let k = argmax(&pg.power);
        assert!((pg.frequencies[k] - 1.0 / 12.0).abs() < 1e-12);
        assert_eq!(argmax(&oracle), k);
    }

    #[test]
    fn constant_has_zero_power() {
        let pg = periodogram(&ts(vec![3.5; 50])).unwrap();
        assert!(pg.power.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn two_sines_give_two_dominant_bins() {
        let n = 336;
        let v: Vec<f64> = sine(7.0, n).iter().zip(sine(24.0, n)).map(|(a, b)| a + b).collect();
        let oracle = dft_oracle(&v);
        let pg = periodogram(&ts(v)).unwrap();
        let mut order: Vec<usize> = (0..pg.len()).collect();
        order.sort_by(|&a, &b| pg.power[b].total_cmp(&pg.power[a]));
        let mut top: Vec<usize> = order[..2].to_vec();
        top.sort();
        assert_eq!(top, vec![n / 24 - 1, n / 7 - 1]);
        let third = pg.power[order[2]];
        assert!(pg.power[order[1]] > 1e6 * third.max(1e-30));
        let mut oracle_order: Vec<usize> = (0..oracle.len()).collect();
        oracle_order.sort_by(|&a, &b| oracle[b].total_cmp(&oracle[a]));
        let mut oracle_top = oracle_order[..2].to_vec();
        oracle_top.sort();
        assert_eq!(oracle_top, top);
    }

    #[test]
    fn too_short_periodogram() {
        assert_eq!(periodogram(&ts(vec![1.0, 2.0, 3.0])), Err(SpectralError::TooShort(3)));
    }

    #[test]
    fn white_noise_is_non_seasonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
        let pg = detection_periodogram(&v).unwrap();
        let guard = SpectralConfig::default().noise_guard(pg.len());
        let mut sorted = pg.power.clone();
        sorted.sort_by(f64::total_cmp);
        let median = 0.5 * (sorted[49] + sorted[50]);
        assert!(pg.max_power() < guard * median, "oracle: no bin passes");
        let f = dominant_frequencies(&ts(v), &SpectralConfig::default());
        assert_eq!(f.periods, vec![1]);
    }

    #[test]
    fn noisy_sine_period_twelve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = sine(12.0, 144)
            .into_iter()
            .map(|s| s + 0.1 * (rng.random::<f64>() - 0.5))
            .collect();
        let f = dominant_frequencies(&ts(v), &SpectralConfig::default());
        assert_eq!(f.dominant(), 12);
    }

    #[test]
    fn length_five_is_non_seasonal() {
        let f = dominant_frequencies(&ts(vec![1.0, 5.0, 2.0, 4.0, 3.0]), &SpectralConfig::default());
        assert_eq!(f.periods, vec![1]);
    }

    #[test]
    fn linear_trend_does_not_mask_season() {
        let v: Vec<f64> = (0..120)
            .map(|t| 10.0 + 0.5 * t as f64 + 3.0 * (2.0 * PI * t as f64 / 12.0).sin())
            .collect();
        let f = dominant_frequencies(&ts(v), &SpectralConfig::default());
        assert_eq!(f.dominant(), 12);
    }

    #[test]
    fn off_bin_period_is_refined() {
        // 700 is not a multiple of 52, so no Fourier bin sits on 1/52
        let v = sine(52.0, 700);
        let f = dominant_frequencies(&ts(v), &SpectralConfig::default());
        assert_eq!(f.dominant(), 52);
    }

    #[test]
    fn noise_guard_grows_with_bins() {
        let c = SpectralConfig::default();
        assert_eq!(c.noise_guard(10), 10.0);
        assert!(c.noise_guard(1000) > 16.0);
    }

    #[test]
    fn peak_count_on_flat_spectrum_is_one() {
        let pg = Periodogram {
            frequencies: vec![0.25, 0.5],
            power: vec![0.0, 0.0],
        };
        assert_eq!(pg.strong_peak_count(0.6), 1);
    }

    #[test]
    fn peak_count_sees_two_lines() {
        let n = 336;
        let v: Vec<f64> = sine(7.0, n).iter().zip(sine(24.0, n)).map(|(a, b)| a + b).collect();
        let pg = periodogram(&ts(v)).unwrap();
        assert_eq!(pg.strong_peak_count(0.6), 2);
    }
}
