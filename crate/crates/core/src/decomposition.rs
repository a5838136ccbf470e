//! Additive trend/season/irregular decomposition with a periodic seasonal
//! component, plus Fourier-term features and their continuation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::TimeSeries;

/// Passes of the season/trend refinement loop.
pub const STL_ITERATIONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompositionError {
    #[error("period {period} needs at least {} observations, got {len}", 2 * period)]
    PeriodTooLargeForSeries { period: usize, len: usize },
    #[error("period must be at least 2, got {0}")]
    PeriodTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub season: Vec<f64>,
    pub irregular: Vec<f64>,
    pub period: usize,
}

impl Decomposition {
    /// One cycle of the seasonal pattern, phase 0 first.
    pub fn pattern(&self) -> &[f64] {
        &self.season[..self.period.min(self.season.len())]
    }

    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }
}

/// Moving-average weights for a centered smoother spanning one period:
/// plain `m`-term average for odd `m`, `2×m` average (half weight on the two
/// end points, `m + 1` taps) for even `m`.
fn period_weights(period: usize) -> Vec<f64> {
    if period % 2 == 1 {
        vec![1.0 / period as f64; period]
    } else {
        let mut w = vec![1.0 / period as f64; period + 1];
        w[0] *= 0.5;
        w[period] *= 0.5;
        w
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ym - slope * xm, slope)
}

/// Centered moving average with the given taps; the undefined ends are
/// filled by extrapolating a least-squares line through the nearest
/// `weights.len()` smoothed values.
pub fn centered_moving_average(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = values.len();
    let window = weights.len();
    let half = window / 2;
    if n < window {
        let mean = values.iter().sum::<f64>() / n as f64;
        return vec![mean; n];
    }
    let mut out = vec![0.0; n];
    for t in half..n - half {
        out[t] = weights.iter().enumerate().map(|(j, w)| w * values[t + j - half]).sum();
    }
    let first = half;
    let last = n - half - 1;
    let span = window.min(last - first + 1);

    let xs: Vec<f64> = (first..first + span).map(|t| t as f64).collect();
    let (a, b) = linear_fit(&xs, &out[first..first + span]);
    for (t, slot) in out.iter_mut().enumerate().take(first) {
        *slot = a + b * t as f64;
    }
    let xs: Vec<f64> = (last + 1 - span..=last).map(|t| t as f64).collect();
    let (a, b) = linear_fit(&xs, &out[last + 1 - span..=last]);
    for (t, slot) in out.iter_mut().enumerate().skip(last + 1) {
        *slot = a + b * t as f64;
    }
    out
}

/// Trend estimate for a non-seasonal series: centered average over `window`
/// (forced odd) with linear end extension.
pub fn smooth_trend(values: &[f64], window: usize) -> Vec<f64> {
    let w = (window | 1).max(1);
    centered_moving_average(values, &vec![1.0 / w as f64; w])
}

/// Per-phase means of `detrended`, centered to sum to zero over one cycle,
/// tiled to the series length.
fn periodic_season(detrended: &[f64], period: usize) -> Vec<f64> {
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (t, v) in detrended.iter().enumerate() {
        sums[t % period] += v;
        counts[t % period] += 1;
    }
    let mut pattern: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let mean = pattern.iter().sum::<f64>() / period as f64;
    pattern.iter_mut().for_each(|p| *p -= mean);
    (0..detrended.len()).map(|t| pattern[t % period]).collect()
}

/// Periodic-mode seasonal/trend decomposition.
///
/// Starting from a moving-average trend, each pass extracts the season as
/// centered per-phase means of the detrended series and re-estimates the
/// trend as the moving average of the deseasonalised series. The irregular
/// part is whatever remains, so the three components add back to the input.
pub fn stl(series: &TimeSeries, period: usize) -> Result<Decomposition, DecompositionError> {
    if period < 2 {
        return Err(DecompositionError::PeriodTooSmall(period));
    }
    let y = series.values();
    if y.len() < 2 * period {
        return Err(DecompositionError::PeriodTooLargeForSeries { period, len: y.len() });
    }
    let weights = period_weights(period);
    let mut trend = centered_moving_average(y, &weights);
    let mut season = vec![0.0; y.len()];
    for _ in 0..STL_ITERATIONS {
        let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
        season = periodic_season(&detrended, period);
        let deseasonal: Vec<f64> = y.iter().zip(&season).map(|(a, b)| a - b).collect();
        trend = centered_moving_average(&deseasonal, &weights);
    }
    let irregular = y.iter().zip(&trend).zip(&season).map(|((v, t), s)| v - t - s).collect();
    Ok(Decomposition {
        trend,
        season,
        irregular,
        period,
    })
}

/// Sine/cosine columns, two per period, evaluated at `t = 0..length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTerms {
    pub periods: Vec<usize>,
    /// Column-major: `columns[2i]` is sin and `columns[2i + 1]` cos of `periods[i]`.
    pub columns: Vec<Vec<f64>>,
}

impl FourierTerms {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.periods
            .iter()
            .flat_map(|m| [format!("sin_{m}"), format!("cos_{m}")])
            .collect()
    }
}

pub fn fourier_terms(length: usize, periods: &[usize]) -> FourierTerms {
    let mut columns = Vec::with_capacity(2 * periods.len());
    for &m in periods {
        let w = 2.0 * std::f64::consts::PI / m as f64;
        columns.push((0..length).map(|t| (w * t as f64).sin()).collect());
        columns.push((0..length).map(|t| (w * t as f64).cos()).collect());
    }
    FourierTerms {
        periods: periods.to_vec(),
        columns,
    }
}

/// 0-based source index of the `k`-th step ahead (`k >= 1`) under the
/// seasonal continuation rule `ŷ(n+k) = y(n + k − m·(⌊(k−1)/m⌋ + 1))`.
pub fn continuation_index(n: usize, period: usize, k: usize) -> usize {
    n + k - period * ((k - 1) / period + 1) - 1
}

/// Continues a periodic sequence `horizon` steps past its end; `values`
/// must hold at least one full period.
pub fn continue_periodic(values: &[f64], period: usize, horizon: usize) -> Vec<f64> {
    let n = values.len();
    (1..=horizon)
        .map(|k| values[continuation_index(n, period, k)])
        .collect()
}

/// The next `horizon` rows of the Fourier terms, each column continued with
/// its own period.
pub fn extend_fourier(terms: &FourierTerms, horizon: usize) -> FourierTerms {
    let columns = terms
        .columns
        .iter()
        .enumerate()
        .map(|(i, col)| continue_periodic(col, terms.periods[i / 2], horizon))
        .collect();
    FourierTerms {
        periods: terms.periods.clone(),
        columns,
    }
}

pub fn continue_season(season: &[f64], period: usize, horizon: usize) -> Vec<f64> {
    continue_periodic(season, period, horizon)
}
