//! End-to-end hybrid forecast: shift and Box-Cox, season detection, STL,
//! a tree learner on the de-trended series, ARIMA on the trend, then the
//! inverse transforms. Series without a usable season go straight to ARIMA.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arima::{auto_arima, forecast_arima, ArimaError, ArimaOrder};
use crate::config::TelescopeConfig;
use crate::decomposition::{
    continue_season, extend_fourier, fourier_terms, smooth_trend, stl, Decomposition, DecompositionError,
};
use crate::recommender::{extract_meta_attributes, RecommenderModel};
use crate::regressors::{fit, predict, FeatureMatrix, Hyperparameters, RegressorError, RegressorKind};
use crate::series::{boxcox, estimate_lambda_guerrero, shift_positive, SeriesError, TimeSeries};
use crate::spectral::{dominant_frequencies, FrequencySet, SpectralConfig};

pub const MIN_PIPELINE_LENGTH: usize = 10;
/// Window of the trend smoother used when no season is detected.
pub const NONSEASONAL_TREND_WINDOW: usize = 5;
pub const SEASON_FEATURE: &str = "season";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("series of length {0} is too short, need at least {MIN_PIPELINE_LENGTH}")]
    TooShort(usize),
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("recommended mode needs a trained recommender model")]
    RecommenderNotTrained,
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Arima(#[from] ArimaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TimeCritical,
    Recommended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRequest {
    pub series: TimeSeries,
    pub horizon: usize,
    pub mode: Mode,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "path", content = "learner")]
pub enum RegressorUsed {
    Learner(RegressorKind),
    FallbackArima,
}

/// Forecast components on the transformed scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentForecasts {
    pub trend: Vec<f64>,
    pub season: Vec<f64>,
    pub detrended: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub frequencies: FrequencySet,
    pub lambda: f64,
    pub shift: f64,
    pub regressor_used: RegressorUsed,
    pub trend_order: ArimaOrder,
    pub component_forecasts: ComponentForecasts,
    /// trend + detrended, before the inverse transforms.
    pub transformed_forecast: Vec<f64>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub forecast: TimeSeries,
    pub diagnostics: Diagnostics,
}

impl ForecastResult {
    pub fn elapsed(&self) -> Duration {
        Duration::from_secs_f64(self.diagnostics.elapsed_seconds)
    }
}

/// Preprocessed series: shift, λ, detected periods, transformed values and
/// (when seasonal) the decomposition at the dominant period.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub shift: f64,
    pub lambda: f64,
    pub frequencies: FrequencySet,
    pub transformed: Vec<f64>,
    pub decomposition: Option<Decomposition>,
}

impl Prepared {
    /// Transformed series minus its trend (STL trend, or a short centered
    /// average for non-seasonal series).
    pub fn detrended(&self) -> Vec<f64> {
        let trend = match &self.decomposition {
            Some(d) => d.trend.clone(),
            None => smooth_trend(&self.transformed, NONSEASONAL_TREND_WINDOW),
        };
        self.transformed.iter().zip(&trend).map(|(y, t)| y - t).collect()
    }
}

pub fn prepare(series: &TimeSeries, spectral: &SpectralConfig) -> Result<Prepared, PipelineError> {
    if series.len() < MIN_PIPELINE_LENGTH {
        return Err(PipelineError::TooShort(series.len()));
    }
    let (shifted, shift) = shift_positive(series);
    let frequencies = dominant_frequencies(&shifted, spectral);
    let lambda = estimate_lambda_guerrero(&shifted, frequencies.dominant());
    let transformed = boxcox(&shifted, lambda)?;
    let decomposition = if frequencies.is_seasonal() {
        Some(stl(&transformed, frequencies.dominant())?)
    } else {
        None
    };
    Ok(Prepared {
        shift,
        lambda,
        frequencies,
        transformed: transformed.into_values(),
        decomposition,
    })
}

/// Training and future feature matrices: Fourier columns for every detected
/// period plus the STL season column.
fn season_features(
    prep: &Prepared,
    dec: &Decomposition,
    horizon: usize,
) -> Result<(FeatureMatrix, FeatureMatrix, Vec<f64>), PipelineError> {
    let n = prep.transformed.len();
    let periods: Vec<usize> = prep.frequencies.periods.iter().copied().filter(|&m| m > 1).collect();
    let terms = fourier_terms(n, &periods);
    let future_terms = extend_fourier(&terms, horizon);
    let future_season = continue_season(&dec.season, dec.period, horizon);

    let mut names = terms.column_names();
    names.push(SEASON_FEATURE.to_string());
    let mut columns = terms.columns;
    columns.push(dec.season.clone());
    let mut future_columns = future_terms.columns;
    future_columns.push(future_season.clone());

    let target = prep.detrended();
    let train = FeatureMatrix::new(names.clone(), columns, Some(target))?;
    let future = FeatureMatrix::new(names, future_columns, None)?;
    Ok((train, future, future_season))
}

/// Future de-trended values from a learner of `kind`, and the continued
/// season. Requires a seasonal preparation.
pub fn forecast_detrended(
    prep: &Prepared,
    horizon: usize,
    kind: RegressorKind,
    seed: u64,
    hyper: &Hyperparameters,
) -> Result<(Vec<f64>, Vec<f64>), PipelineError> {
    let dec = prep
        .decomposition
        .as_ref()
        .expect("seasonal preparation has a decomposition");
    let (train, future, season) = season_features(prep, dec, horizon)?;
    let model = fit(kind, &train, seed, hyper)?;
    Ok((predict(&model, &future)?, season))
}

/// ARIMA forecast of the STL trend (seasonal) or of the whole transformed
/// series (fallback).
pub fn forecast_trend(prep: &Prepared, horizon: usize) -> Result<(Vec<f64>, ArimaOrder), PipelineError> {
    let input = match &prep.decomposition {
        Some(d) => &d.trend,
        None => &prep.transformed,
    };
    let fit = auto_arima(input)?;
    Ok((forecast_arima(&fit, input, horizon), fit.order))
}

/// Keeps extrapolated values within ten ranges of the observed transformed
/// values so the inverse transform stays finite.
fn clamp_to_history(values: &mut [f64], history: &[f64]) {
    let lo = history.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = 10.0 * (hi - lo) + 1.0;
    for v in values.iter_mut() {
        *v = if v.is_finite() {
            v.clamp(lo - span, hi + span)
        } else {
            hi
        };
    }
}

/// Transformed-scale forecast for a fixed learner (or the fallback when the
/// preparation is non-seasonal).
pub fn forecast_prepared(
    prep: &Prepared,
    horizon: usize,
    kind: RegressorKind,
    seed: u64,
    hyper: &Hyperparameters,
) -> Result<(ComponentForecasts, RegressorUsed, ArimaOrder), PipelineError> {
    if prep.decomposition.is_none() {
        let (trend, order) = forecast_trend(prep, horizon)?;
        let components = ComponentForecasts {
            trend,
            season: vec![0.0; horizon],
            detrended: vec![0.0; horizon],
        };
        return Ok((components, RegressorUsed::FallbackArima, order));
    }
    // the trend and detrended models are independent
    let (trend, learner) = rayon::join(
        || forecast_trend(prep, horizon),
        || forecast_detrended(prep, horizon, kind, seed, hyper),
    );
    let (trend, order) = trend?;
    let (detrended, season) = learner?;
    let components = ComponentForecasts {
        trend,
        season,
        detrended,
    };
    Ok((components, RegressorUsed::Learner(kind), order))
}

/// Original-scale values for a transformed-scale forecast.
pub fn postprocess(prep: &Prepared, transformed: &[f64]) -> Vec<f64> {
    let mut w = transformed.to_vec();
    clamp_to_history(&mut w, &prep.transformed);
    let state = crate::series::TransformState {
        lambda: prep.lambda,
        shift: prep.shift,
    };
    state.invert(&w)
}

pub fn forecast(
    request: &ForecastRequest,
    config: &TelescopeConfig,
    recommender: Option<&RecommenderModel>,
) -> Result<ForecastResult, PipelineError> {
    let started = Instant::now();
    if request.horizon == 0 {
        return Err(PipelineError::InvalidHorizon);
    }
    if request.mode == Mode::Recommended && recommender.is_none() {
        return Err(PipelineError::RecommenderNotTrained);
    }
    let prep = prepare(&request.series, &config.spectral)?;
    let kind = match (request.mode, recommender) {
        (Mode::Recommended, Some(model)) if prep.frequencies.is_seasonal() => {
            model.select(&extract_meta_attributes(&prep.detrended(), &config.spectral))
        }
        _ => RegressorKind::GradientBoosting,
    };
    let (components, used, trend_order) = forecast_prepared(&prep, request.horizon, kind, request.seed, &config.hyper)?;
    let transformed_forecast: Vec<f64> = components
        .trend
        .iter()
        .zip(&components.detrended)
        .map(|(t, d)| t + d)
        .collect();
    let values = postprocess(&prep, &transformed_forecast);
    let start = request.series.start_index() + request.series.len() as i64;
    let forecast = TimeSeries::with_start(values, start)?;
    Ok(ForecastResult {
        forecast,
        diagnostics: Diagnostics {
            frequencies: prep.frequencies,
            lambda: prep.lambda,
            shift: prep.shift,
            regressor_used: used,
            trend_order,
            component_forecasts: components,
            transformed_forecast,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        },
    })
}
