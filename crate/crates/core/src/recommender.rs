//! Learner selection by meta-learning: series characteristics are mapped to
//! each learner's expected accuracy degradation by one random forest per
//! learner, and the learner with the smallest prediction wins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{smape, BenchmarkError};
use crate::config::TelescopeConfig;
use crate::decomposition::{smooth_trend, stl};
use crate::pipeline::{
    forecast_detrended, forecast_trend, postprocess, prepare, PipelineError, NONSEASONAL_TREND_WINDOW,
};
use crate::regressors::{fit, FeatureMatrix, FittedModel, RegressorError, RegressorKind};
use crate::series::{mean_sd, SeriesError, TimeSeries};
use crate::spectral::{dominant_frequencies, periodogram, SpectralConfig};

pub const HISTORY_FRACTION: f64 = 0.8;
pub const EPSILON_FLOOR: f64 = 1e-9;
pub const MODEL_FORMAT: &str = "telescope-recommender";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecommenderError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no corpus series could be evaluated")]
    NoUsableSeries,
    #[error("recommender model is not trained")]
    RecommenderNotTrained,
    #[error("series of length {0} is too short to split into history and holdout")]
    TooShort(usize),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("model file: {0}")]
    Format(String),
}

/// Characteristics of a de-trended series that drive learner selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaAttributes {
    pub s1_frequency: f64,
    pub s2_length: f64,
    pub s3_std_dev: f64,
    pub s4_skewness: f64,
    pub s5_irregular_skewness: f64,
    pub s6_irregular_kurtosis: f64,
    pub b1_mean_period_entropy: f64,
    pub b2_entropy_cv: f64,
    pub b3_mean_cosine_similarity: f64,
    pub b4_sinus_approx_dw: f64,
    pub l1_second_frequency: f64,
    pub l2_third_frequency: f64,
    pub l3_max_spectral_value: f64,
    pub l4_peak_count: f64,
    pub w1_seasonal_strength: f64,
    pub w2_serial_correlation: f64,
    pub w3_irregular_serial_correlation: f64,
    pub w4_nonlinearity: f64,
    pub w5_irregular_nonlinearity: f64,
    pub w6_self_similarity: f64,
}

pub const FIELD_NAMES: [&str; 20] = [
    "s1_frequency",
    "s2_length",
    "s3_std_dev",
    "s4_skewness",
    "s5_irregular_skewness",
    "s6_irregular_kurtosis",
    "b1_mean_period_entropy",
    "b2_entropy_cv",
    "b3_mean_cosine_similarity",
    "b4_sinus_approx_dw",
    "l1_second_frequency",
    "l2_third_frequency",
    "l3_max_spectral_value",
    "l4_peak_count",
    "w1_seasonal_strength",
    "w2_serial_correlation",
    "w3_irregular_serial_correlation",
    "w4_nonlinearity",
    "w5_irregular_nonlinearity",
    "w6_self_similarity",
];

impl MetaAttributes {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.s1_frequency,
            self.s2_length,
            self.s3_std_dev,
            self.s4_skewness,
            self.s5_irregular_skewness,
            self.s6_irregular_kurtosis,
            self.b1_mean_period_entropy,
            self.b2_entropy_cv,
            self.b3_mean_cosine_similarity,
            self.b4_sinus_approx_dw,
            self.l1_second_frequency,
            self.l2_third_frequency,
            self.l3_max_spectral_value,
            self.l4_peak_count,
            self.w1_seasonal_strength,
            self.w2_serial_correlation,
            self.w3_irregular_serial_correlation,
            self.w4_nonlinearity,
            self.w5_irregular_nonlinearity,
            self.w6_self_similarity,
        ]
    }
}

fn central_moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

/// Adjusted Fisher-Pearson skewness; 0 for short or constant input.
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (_, m2, m3, _) = central_moments(x);
    if x.len() < 3 || m2 <= 0.0 {
        return 0.0;
    }
    (n * (n - 1.0)).sqrt() / (n - 2.0) * m3 / m2.powf(1.5)
}

/// Sample excess kurtosis; 0 for short or constant input.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (_, m2, _, m4) = central_moments(x);
    if x.len() < 4 || m2 <= 0.0 {
        return 0.0;
    }
    let g2 = m4 / (m2 * m2) - 3.0;
    ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0))
}

pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let (mean, m2, _, _) = central_moments(x);
    if m2 <= 0.0 {
        return 0.0;
    }
    let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / (m2 * x.len() as f64)
}

/// Approximate entropy with embedding dimension `m` and tolerance `r`.
pub fn approximate_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    fn phi(x: &[f64], m: usize, r: f64) -> f64 {
        let count = x.len() + 1 - m;
        let mut total = 0.0;
        for i in 0..count {
            let matches = (0..count)
                .filter(|&j| (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r))
                .count();
            total += (matches as f64 / count as f64).ln();
        }
        total / count as f64
    }
    if x.len() <= m + 1 {
        return 0.0;
    }
    (phi(x, m, r) - phi(x, m + 1, r)).max(0.0)
}

fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    match (na > 0.0, nb > 0.0) {
        (true, true) => (dot / (na * nb)).clamp(-1.0, 1.0),
        (false, false) => 1.0,
        _ => 0.0,
    }
}

/// Durbin-Watson statistic of the residuals of a least-squares sine fit at
/// `period`; 2 when the fit is exact.
fn sine_fit_durbin_watson(x: &[f64], period: usize) -> f64 {
    let w = 2.0 * std::f64::consts::PI / period as f64;
    let rows: Vec<[f64; 3]> = (0..x.len())
        .map(|t| [1.0, (w * t as f64).sin(), (w * t as f64).cos()])
        .collect();
    let Some(beta) = least_squares(&rows, x) else {
        return 2.0;
    };
    let resid: Vec<f64> = rows
        .iter()
        .zip(x)
        .map(|(r, y)| y - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let sse: f64 = resid.iter().map(|e| e * e).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if sse <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
        return 2.0;
    }
    resid.windows(2).map(|e| (e[1] - e[0]).powi(2)).sum::<f64>() / sse
}

/// Ordinary least squares via the normal equations; `None` when singular.
fn least_squares<const K: usize>(rows: &[[f64; K]], y: &[f64]) -> Option<Vec<f64>> {
    let mut a = nalgebra::DMatrix::<f64>::zeros(K, K);
    let mut b = nalgebra::DVector::<f64>::zeros(K);
    for (r, &v) in rows.iter().zip(y) {
        for i in 0..K {
            b[i] += r[i] * v;
            for j in 0..K {
                a[(i, j)] += r[i] * r[j];
            }
        }
    }
    let sol = a.cholesky()?.solve(&b);
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

fn sse_of<const K: usize>(rows: &[[f64; K]], y: &[f64]) -> Option<f64> {
    let beta = least_squares(rows, y)?;
    Some(
        rows.iter()
            .zip(y)
            .map(|(r, v)| (v - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
            .sum(),
    )
}

/// F-statistic of adding squared and cubed lag terms to a linear AR(1)
/// regression; 0 when undefined.
pub fn nonlinearity(x: &[f64]) -> f64 {
    let (mean, sd) = mean_sd(x);
    if x.len() < 8 || sd.is_nan() || sd <= 0.0 {
        return 0.0;
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let y = &z[1..];
    let linear: Vec<[f64; 2]> = z[..z.len() - 1].iter().map(|&l| [1.0, l]).collect();
    let cubic: Vec<[f64; 4]> = z[..z.len() - 1].iter().map(|&l| [1.0, l, l * l, l * l * l]).collect();
    let (Some(restricted), Some(full)) = (sse_of(&linear, y), sse_of(&cubic, y)) else {
        return 0.0;
    };
    if restricted <= 1e-12 {
        return 0.0;
    }
    let dof = (y.len() - 4) as f64;
    let f = ((restricted - full).max(0.0) / 2.0) / (full.max(1e-12 * restricted) / dof);
    if f.is_finite() {
        f
    } else {
        0.0
    }
}

/// Hurst exponent by rescaled range over dyadic window sizes from 8 to n/2;
/// 0.5 when fewer than two window sizes are usable.
pub fn hurst_exponent(x: &[f64]) -> f64 {
    let mut points = Vec::new();
    let mut size = 8;
    while size <= x.len() / 2 {
        let mut rs = Vec::new();
        for chunk in x.chunks_exact(size) {
            let (mean, sd) = {
                let (m, v, _, _) = central_moments(chunk);
                (m, v.sqrt())
            };
            if sd <= 0.0 {
                continue;
            }
            let mut cum = 0.0;
            let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
            for v in chunk {
                cum += v - mean;
                lo = lo.min(cum);
                hi = hi.max(cum);
            }
            rs.push((hi - lo) / sd);
        }
        if !rs.is_empty() {
            let avg = rs.iter().sum::<f64>() / rs.len() as f64;
            if avg > 0.0 {
                points.push(((size as f64).ln(), avg.ln()));
            }
        }
        size *= 2;
    }
    if points.len() < 2 {
        return 0.5;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn variance(x: &[f64]) -> f64 {
    central_moments(x).1
}

/// Computes the 20 attributes of a de-trended series. Non-seasonal input
/// gets fixed sentinel values for the period-based attributes.
pub fn extract_meta_attributes(detrended: &[f64], spectral: &SpectralConfig) -> MetaAttributes {
    let x: Vec<f64> = detrended.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    let Ok(series) = TimeSeries::new(x.clone()) else {
        return sentinel_attributes(0.0);
    };
    let freqs = dominant_frequencies(&series, spectral);
    let pg = periodogram(&series).ok();
    let (_, sd) = mean_sd(&x);
    let m = freqs.dominant();
    let decomposition = if freqs.is_seasonal() {
        stl(&series, m).ok()
    } else {
        None
    };

    let mut attrs = sentinel_attributes(x.len() as f64);
    attrs.s3_std_dev = if sd.is_finite() { sd } else { 0.0 };
    attrs.s4_skewness = skewness(&x);
    attrs.l3_max_spectral_value = pg.as_ref().map_or(0.0, |p| p.max_power());
    attrs.l4_peak_count = pg.as_ref().map_or(1, |p| p.strong_peak_count(0.6)) as f64;
    attrs.w2_serial_correlation = lag1_autocorrelation(&x);
    attrs.w4_nonlinearity = nonlinearity(&x);
    attrs.w6_self_similarity = hurst_exponent(&x);

    let irregular = match &decomposition {
        Some(d) => {
            let cycles: Vec<&[f64]> = x.chunks_exact(m).collect();
            let entropies: Vec<f64> = cycles
                .iter()
                .map(|c| {
                    let (_, csd) = mean_sd(c);
                    approximate_entropy(c, 2, 0.2 * csd)
                })
                .collect();
            let (em, esd) = mean_sd(&entropies);
            attrs.s1_frequency = m as f64;
            attrs.b1_mean_period_entropy = em;
            attrs.b2_entropy_cv = if em > 0.0 && esd.is_finite() { esd / em } else { 0.0 };
            let mut sims = Vec::new();
            for i in 0..cycles.len() {
                for j in i + 1..cycles.len() {
                    sims.push(cosine_similarity(cycles[i], cycles[j]));
                }
            }
            attrs.b3_mean_cosine_similarity = if sims.is_empty() {
                1.0
            } else {
                (sims.iter().sum::<f64>() / sims.len() as f64).clamp(-1.0, 1.0)
            };
            attrs.b4_sinus_approx_dw = sine_fit_durbin_watson(&x, m);
            attrs.l1_second_frequency = freqs.nth_or_one(1) as f64;
            attrs.l2_third_frequency = freqs.nth_or_one(2) as f64;
            let si: Vec<f64> = d.season.iter().zip(&d.irregular).map(|(s, i)| s + i).collect();
            let total = variance(&si);
            attrs.w1_seasonal_strength = if total > 0.0 {
                (1.0 - variance(&d.irregular) / total).clamp(0.0, 1.0)
            } else {
                0.0
            };
            d.irregular.clone()
        }
        None => x.clone(),
    };
    attrs.s5_irregular_skewness = skewness(&irregular);
    attrs.s6_irregular_kurtosis = excess_kurtosis(&irregular);
    attrs.w3_irregular_serial_correlation = lag1_autocorrelation(&irregular);
    attrs.w5_irregular_nonlinearity = nonlinearity(&irregular);
    attrs
}

fn sentinel_attributes(length: f64) -> MetaAttributes {
    MetaAttributes {
        s1_frequency: 1.0,
        s2_length: length,
        s3_std_dev: 0.0,
        s4_skewness: 0.0,
        s5_irregular_skewness: 0.0,
        s6_irregular_kurtosis: 0.0,
        b1_mean_period_entropy: 0.0,
        b2_entropy_cv: 0.0,
        b3_mean_cosine_similarity: 0.0,
        b4_sinus_approx_dw: 2.0,
        l1_second_frequency: 1.0,
        l2_third_frequency: 1.0,
        l3_max_spectral_value: 0.0,
        l4_peak_count: 1.0,
        w1_seasonal_strength: 0.0,
        w2_serial_correlation: 0.0,
        w3_irregular_serial_correlation: 0.0,
        w4_nonlinearity: 0.0,
        w5_irregular_nonlinearity: 0.0,
        w6_self_similarity: 0.5,
    }
}

/// Per-learner holdout error and its ratio to the best learner's error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationVector {
    pub methods: Vec<RegressorKind>,
    pub epsilon: Vec<f64>,
    pub theta: Vec<f64>,
}

impl DegradationVector {
    /// `θ_i = ε_i / min ε` after flooring every ε at `EPSILON_FLOOR`.
    /// Non-finite ε (failed methods) take the worst finite value.
    pub fn from_errors(methods: Vec<RegressorKind>, errors: &[f64]) -> Self {
        let worst = errors
            .iter()
            .copied()
            .filter(|e| e.is_finite())
            .fold(f64::NAN, f64::max);
        let epsilon: Vec<f64> = errors
            .iter()
            .map(|&e| {
                let e = if e.is_finite() { e } else { worst };
                if e.is_finite() {
                    e.max(EPSILON_FLOOR)
                } else {
                    1.0
                }
            })
            .collect();
        let min = epsilon.iter().copied().fold(f64::INFINITY, f64::min);
        let theta = epsilon.iter().map(|e| e / min).collect();
        Self {
            methods,
            epsilon,
            theta,
        }
    }

    pub fn best(&self) -> Option<RegressorKind> {
        argmin_kind(self.methods.iter().copied().zip(self.theta.iter().copied()))
    }
}

/// Smallest score wins; ties go to the earlier learner in `RegressorKind::ALL`.
pub fn argmin_kind(scores: impl IntoIterator<Item = (RegressorKind, f64)>) -> Option<RegressorKind> {
    let mut best: Option<(RegressorKind, f64)> = None;
    for (kind, score) in scores {
        let better = match best {
            None => true,
            Some((bk, bs)) => score < bs || (score == bs && kind < bk),
        };
        if better {
            best = Some((kind, score));
        }
    }
    best.map(|b| b.0)
}

/// Holdout sMAPE of every learner on an 80/20 split of `series`.
pub fn evaluate_base_methods(
    series: &TimeSeries,
    seed: u64,
    config: &TelescopeConfig,
) -> Result<DegradationVector, RecommenderError> {
    let history = (series.len() as f64 * HISTORY_FRACTION).floor() as usize;
    if history == series.len() || history == 0 {
        return Err(RecommenderError::TooShort(series.len()));
    }
    let (head, tail) = series.split_at(history)?;
    let horizon = tail.len();
    let prep = prepare(&head, &config.spectral)?;
    let methods = RegressorKind::ALL.to_vec();

    let trend = forecast_trend(&prep, horizon)?.0;
    let errors: Vec<f64> = methods
        .iter()
        .map(|&kind| {
            let transformed = if prep.decomposition.is_some() {
                match forecast_detrended(&prep, horizon, kind, seed, &config.hyper) {
                    Ok((det, _)) => trend.iter().zip(&det).map(|(a, b)| a + b).collect(),
                    Err(_) => return f64::NAN,
                }
            } else {
                trend.clone()
            };
            let values = postprocess(&prep, &transformed);
            match smape(tail.values(), &values) {
                Ok(s) => s.value,
                Err(BenchmarkError::LengthMismatch { .. }) | Err(_) => f64::NAN,
            }
        })
        .collect();
    Ok(DegradationVector::from_errors(methods, &errors))
}

#[derive(Debug, Clone)]
struct Component {
    trend: Vec<f64>,
    /// One cycle; a single zero for non-seasonal members.
    pattern: Vec<f64>,
    irregular: Vec<f64>,
}

fn decompose_member(series: &TimeSeries, spectral: &SpectralConfig) -> Component {
    let freqs = dominant_frequencies(series, spectral);
    if freqs.is_seasonal() {
        if let Ok(d) = stl(series, freqs.dominant()) {
            return Component {
                pattern: d.pattern().to_vec(),
                trend: d.trend,
                irregular: d.irregular,
            };
        }
    }
    let trend = smooth_trend(series.values(), NONSEASONAL_TREND_WINDOW);
    let irregular = series.values().iter().zip(&trend).map(|(y, t)| y - t).collect();
    Component {
        trend,
        pattern: vec![0.0],
        irregular,
    }
}

/// New series recombining the trend, season and irregular parts of randomly
/// drawn corpus members, with random amplitudes and seasonal phase.
pub fn generate_series(
    corpus: &[TimeSeries],
    count: usize,
    seed: u64,
    spectral: &SpectralConfig,
) -> Result<Vec<TimeSeries>, RecommenderError> {
    if corpus.is_empty() {
        return Err(RecommenderError::EmptyCorpus);
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let parts: Vec<Component> = corpus.iter().map(|s| decompose_member(s, spectral)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let a = &parts[rng.random_range(0..parts.len())];
        let b = &parts[rng.random_range(0..parts.len())];
        let c = &parts[rng.random_range(0..parts.len())];
        let season_scale = rng.random_range(0.5..=2.0);
        let irregular_scale = rng.random_range(0.5..=2.0);
        let m = b.pattern.len();
        let phase = rng.random_range(0..m);
        let len = a.trend.len().min(c.irregular.len());
        let values: Vec<f64> = (0..len)
            .map(|t| a.trend[t] + b.pattern[(t + phase) % m] * season_scale + c.irregular[t] * irregular_scale)
            .collect();
        out.push(TimeSeries::new(values)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_size: usize,
    pub augmented: usize,
    pub rows: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodModel {
    pub kind: RegressorKind,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderModel {
    pub format: String,
    pub version: u32,
    pub schema: Vec<String>,
    pub provenance: Provenance,
    pub methods: Vec<MethodModel>,
}

/// One row of the meta-level data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaExample {
    pub attributes: MetaAttributes,
    pub degradation: DegradationVector,
}

/// Attributes of the full series and the holdout degradation of every
/// learner.
pub fn meta_example(series: &TimeSeries, seed: u64, config: &TelescopeConfig) -> Result<MetaExample, RecommenderError> {
    let prep = prepare(series, &config.spectral)?;
    let attributes = extract_meta_attributes(&prep.detrended(), &config.spectral);
    let degradation = evaluate_base_methods(series, seed, config)?;
    Ok(MetaExample {
        attributes,
        degradation,
    })
}

/// Fits one random forest per learner from attributes to degradation.
pub fn fit_meta_models(
    examples: &[MetaExample],
    seed: u64,
    config: &TelescopeConfig,
) -> Result<Vec<MethodModel>, RecommenderError> {
    let names: Vec<String> = FIELD_NAMES.iter().map(|s| s.to_string()).collect();
    let columns: Vec<Vec<f64>> = (0..FIELD_NAMES.len())
        .map(|j| examples.iter().map(|e| e.attributes.to_vec()[j]).collect())
        .collect();
    RegressorKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let target = examples.iter().map(|e| e.degradation.theta[i]).collect();
            let fm = FeatureMatrix::new(names.clone(), columns.clone(), Some(target))?;
            let model = fit(
                RegressorKind::RandomForest,
                &fm,
                seed.wrapping_add(i as u64),
                &config.hyper,
            )?;
            Ok(MethodModel { kind, model })
        })
        .collect()
}

/// Augments the corpus to `augment_to` series, evaluates every series and
/// learns the degradation regressors. Series that cannot be evaluated are
/// skipped. Work is spread over the current rayon pool; results are reduced
/// in corpus order.
pub fn train(
    corpus: &[TimeSeries],
    augment_to: usize,
    seed: u64,
    config: &TelescopeConfig,
) -> Result<RecommenderModel, RecommenderError> {
    if corpus.is_empty() {
        return Err(RecommenderError::EmptyCorpus);
    }
    let extra = augment_to.saturating_sub(corpus.len());
    let generated = generate_series(corpus, extra, seed, &config.spectral)?;
    let all: Vec<&TimeSeries> = corpus.iter().chain(&generated).collect();
    let examples: Vec<MetaExample> = all
        .par_iter()
        .enumerate()
        .map(|(i, s)| meta_example(s, seed.wrapping_add(i as u64), config).ok())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if examples.is_empty() {
        return Err(RecommenderError::NoUsableSeries);
    }
    let methods = fit_meta_models(&examples, seed, config)?;
    Ok(RecommenderModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        schema: FIELD_NAMES.iter().map(|s| s.to_string()).collect(),
        provenance: Provenance {
            corpus_size: corpus.len(),
            augmented: generated.len(),
            rows: examples.len(),
            seed,
        },
        methods,
    })
}

impl RecommenderModel {
    pub fn predicted_degradation(&self, attrs: &MetaAttributes) -> Vec<(RegressorKind, f64)> {
        let row = attrs.to_vec();
        self.methods
            .iter()
            .map(|m| (m.kind, m.model.predict_row(&row)))
            .collect()
    }

    /// Learner with the smallest predicted degradation.
    pub fn select(&self, attrs: &MetaAttributes) -> RegressorKind {
        argmin_kind(self.predicted_degradation(attrs)).unwrap_or(RegressorKind::GradientBoosting)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, RecommenderError> {
        let model: Self = serde_json::from_str(text).map_err(|e| RecommenderError::Format(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(RecommenderError::Format(format!(
                "unsupported format {} v{}",
                model.format, model.version
            )));
        }
        if model.schema != FIELD_NAMES {
            return Err(RecommenderError::Format("attribute schema mismatch".into()));
        }
        for m in &model.methods {
            if m.model.feature_names != model.schema {
                return Err(RecommenderError::Format(format!(
                    "{} regressor schema mismatch",
                    m.kind
                )));
            }
        }
        if model.methods.is_empty() {
            return Err(RecommenderError::RecommenderNotTrained);
        }
        Ok(model)
    }
}

/// Learner recommended for `series`, judged on its de-trended transform.
pub fn recommend(
    model: Option<&RecommenderModel>,
    series: &TimeSeries,
    config: &TelescopeConfig,
) -> Result<RegressorKind, RecommenderError> {
    let model = model.ok_or(RecommenderError::RecommenderNotTrained)?;
    let prep = prepare(series, &config.spectral)?;
    Ok(model.select(&extract_meta_attributes(&prep.detrended(), &config.spectral)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn sine(n: usize, m: usize) -> Vec<f64> {
        (0..n).map(|t| (2.0 * PI * t as f64 / m as f64).sin()).collect()
    }

    #[test]
    fn degradation_examples() {
        let kinds = RegressorKind::ALL.to_vec();
        assert_eq!(
            DegradationVector::from_errors(kinds.clone(), &[2.0, 1.0, 4.0]).theta,
            vec![2.0, 1.0, 4.0]
        );
        assert_eq!(
            DegradationVector::from_errors(kinds.clone(), &[0.2, 0.1, 0.4]).theta,
            vec![2.0, 1.0, 4.0]
        );
        assert_eq!(
            DegradationVector::from_errors(kinds.clone(), &[3.0; 3]).theta,
            vec![1.0; 3]
        );
        let failed = DegradationVector::from_errors(kinds, &[f64::NAN, 1.0, 4.0]);
        assert_eq!(failed.epsilon, vec![4.0, 1.0, 4.0]);
    }

    #[test]
    fn argmin_rules() {
        use RegressorKind::*;
        assert_eq!(
            argmin_kind([(Cart, 1.5), (RandomForest, 1.0), (GradientBoosting, 1.2)]),
            Some(RandomForest)
        );
        assert_eq!(
            argmin_kind([(GradientBoosting, 1.0), (RandomForest, 1.0), (Cart, 1.0)]),
            Some(Cart)
        );
        assert_eq!(
            argmin_kind([(Cart, 3.0), (RandomForest, 2.0), (GradientBoosting, 2.4)]),
            Some(RandomForest)
        );
    }

    #[test]
    fn length_and_sine_similarity() {
        let a = extract_meta_attributes(&sine(100, 12), &SpectralConfig::default());
        assert_eq!(a.s2_length, 100.0);
        assert_eq!(a.s1_frequency, 12.0);
        assert!(a.b3_mean_cosine_similarity > 0.999);
        assert!(a.w1_seasonal_strength > 0.99);
        for v in a.to_vec() {
            assert!(v.is_finite());
        }
    }

    #[test]
    fn white_noise_attributes() {
        let x = noise(300, 3);
        let a = extract_meta_attributes(&x, &SpectralConfig::default());
        assert_eq!(a.s1_frequency, 1.0);
        assert!(a.w1_seasonal_strength < 0.2);
        assert_eq!(a.b4_sinus_approx_dw, 2.0);
        assert!(a.l4_peak_count >= 1.0);
        assert!((a.w6_self_similarity - 0.5).abs() < 0.25, "{}", a.w6_self_similarity);
    }

    #[test]
    fn white_noise_strength_against_stl() {
        // seasonal strength of noise measured directly at a forced period
        let x = noise(240, 9);
        let d = stl(&TimeSeries::new(x).unwrap(), 12).unwrap();
        let si: Vec<f64> = d.season.iter().zip(&d.irregular).map(|(s, i)| s + i).collect();
        let w1 = (1.0 - variance(&d.irregular) / variance(&si)).max(0.0);
        assert!(w1 < 0.2, "{w1}");
    }

    #[test]
    fn moment_oracles() {
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        let n = 5.0;
        let d: Vec<f64> = x.iter().map(|v| v - 4.0).collect();
        let m2: f64 = d.iter().map(|v| v * v).sum::<f64>() / n;
        let m3: f64 = d.iter().map(|v| v.powi(3)).sum::<f64>() / n;
        let m4: f64 = d.iter().map(|v| v.powi(4)).sum::<f64>() / n;
        let g1 = m3 / m2.powf(1.5);
        assert!((skewness(&x) - g1 * (20.0f64).sqrt() / 3.0).abs() < 1e-12);
        let g2 = m4 / (m2 * m2) - 3.0;
        assert!((excess_kurtosis(&x) - (6.0 * g2 + 6.0) * 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(skewness(&[2.0; 5]), 0.0);
    }

    #[test]
    fn entropy_of_regular_and_irregular() {
        let regular: Vec<f64> = (0..60).map(|t| (t % 3) as f64).collect();
        let irregular = noise(60, 4);
        assert!(approximate_entropy(&regular, 2, 0.2) < 0.05);
        assert!(approximate_entropy(&irregular, 2, 0.2) > 0.3);
    }

    #[test]
    fn nonlinearity_detects_quadratic_map() {
        let mut x = vec![0.3];
        for t in 1..300 {
            let prev: f64 = x[t - 1];
            x.push(3.9 * prev * (1.0 - prev));
        }
        assert!(nonlinearity(&x) > 100.0);
        assert!(nonlinearity(&noise(300, 1)) < 10.0);
    }

    #[test]
    fn generated_series_are_valid_and_reproducible() {
        let corpus =
            vec![TimeSeries::new((0..96).map(|t| 10.0 + t as f64 * 0.1 + 3.0 * sine(96, 12)[t]).collect()).unwrap()];
        let cfg = SpectralConfig::default();
        assert!(generate_series(&corpus, 0, 1, &cfg).unwrap().is_empty());
        let a = generate_series(&corpus, 3, 5, &cfg).unwrap();
        assert_eq!(a.len(), 3);
        for s in &a {
            assert!(s.len() <= 96);
            assert!(s.values().iter().all(|v| v.is_finite()));
        }
        assert_eq!(a, generate_series(&corpus, 3, 5, &cfg).unwrap());
        assert_eq!(generate_series(&[], 3, 5, &cfg), Err(RecommenderError::EmptyCorpus));
    }

    #[test]
    fn recommend_without_model() {
        let s = TimeSeries::new(sine(50, 5).iter().map(|v| v + 3.0).collect()).unwrap();
        assert_eq!(
            recommend(None, &s, &TelescopeConfig::default()),
            Err(RecommenderError::RecommenderNotTrained)
        );
    }
}
