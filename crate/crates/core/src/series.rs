//! Univariate series representation, validation, ordinate shifting and the
//! Box-Cox power transform with Guerrero's variance-stabilising λ search.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor applied to `λ·w + 1` before the inverse power transform.
pub const INV_BOXCOX_FLOOR: f64 = 1e-12;

/// Number of grid points in the Guerrero λ search over `[0, 2]`.
pub const GUERRERO_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series is empty")]
    Empty,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("non-positive value at index {0} cannot be Box-Cox transformed")]
    NonPositiveValue(usize),
    #[error("line {line}: cannot parse `{text}` as a number")]
    Parse { line: usize, text: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Ordered, equidistant, fully numeric observations. Index position is time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    start_index: i64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, SeriesError> {
        validate(&values)?;
        Ok(Self { values, start_index: 0 })
    }

    pub fn with_start(values: Vec<f64>, start_index: i64) -> Result<Self, SeriesError> {
        let mut series = Self::new(values)?;
        series.start_index = start_index;
        Ok(series)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false for a constructed series; kept for clippy's sake.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Splits into the first `head` observations and the remainder.
    pub fn split_at(&self, head: usize) -> Result<(TimeSeries, TimeSeries), SeriesError> {
        let (a, b) = self.values.split_at(head.min(self.len()));
        Ok((
            TimeSeries::with_start(a.to_vec(), self.start_index)?,
            TimeSeries::with_start(b.to_vec(), self.start_index + a.len() as i64)?,
        ))
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Ok iff the values are non-empty and all finite.
pub fn validate(values: &[f64]) -> Result<(), SeriesError> {
    if values.is_empty() {
        return Err(SeriesError::Empty);
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SeriesError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Box-Cox parameter and ordinate shift needed to undo preprocessing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformState {
    pub lambda: f64,
    pub shift: f64,
}

impl TransformState {
    pub fn identity() -> Self {
        Self {
            lambda: 1.0,
            shift: 0.0,
        }
    }

    /// Maps transformed-scale values back to the original scale.
    pub fn invert(&self, transformed: &[f64]) -> Vec<f64> {
        inv_boxcox_values(transformed, self.lambda)
            .into_iter()
            .map(|v| v - self.shift)
            .collect()
    }
}

/// Moves the series up so its minimum is exactly 1 when any value is `<= 0`.
pub fn shift_positive(series: &TimeSeries) -> (TimeSeries, f64) {
    let min = series.min();
    if min > 0.0 {
        return (series.clone(), 0.0);
    }
    let shift = 1.0 - min;
    let values = series.values.iter().map(|v| v + shift).collect();
    (
        TimeSeries {
            values,
            start_index: series.start_index,
        },
        shift,
    )
}

/// Guerrero objective for one λ: coefficient of variation of the per-block
/// ratios `sd / mean^(1-λ)`. `None` when undefined (zero mean ratio).
pub fn guerrero_objective(blocks: &[(f64, f64)], lambda: f64) -> Option<f64> {
    let ratios: Vec<f64> = blocks.iter().map(|&(mean, sd)| sd / mean.powf(1.0 - lambda)).collect();
    let (m, s) = mean_sd(&ratios);
    if !(m.is_finite() && s.is_finite()) || m <= 0.0 {
        return None;
    }
    Some(s / m)
}

/// Per-block `(mean, sd)` over the most recent complete blocks of length
/// `max(frequency, 2)`; leading observations that do not fill a block are
/// dropped.
pub fn guerrero_blocks(values: &[f64], frequency: usize) -> Vec<(f64, f64)> {
    let block = frequency.max(2);
    let count = values.len() / block;
    let skip = values.len() - count * block;
    values[skip..].chunks_exact(block).map(mean_sd).collect()
}

/// λ in `[0, 2]` minimising Guerrero's coefficient-of-variation criterion.
///
/// Falls back to `λ = 1` (no transform) when fewer than two complete blocks
/// exist or the criterion is undefined for every grid point.
pub fn estimate_lambda_guerrero(series: &TimeSeries, frequency: usize) -> f64 {
    let blocks = guerrero_blocks(&series.values, frequency);
    if blocks.len() < 2 || blocks.iter().any(|&(m, _)| m <= 0.0) {
        return 1.0;
    }
    let mut best: Option<(f64, f64)> = None;
    for i in 0..GUERRERO_GRID_POINTS {
        let lambda = i as f64 / (GUERRERO_GRID_POINTS - 1) as f64 * 2.0;
        if let Some(cv) = guerrero_objective(&blocks, lambda) {
            if best.is_none_or(|(_, b)| cv < b) {
                best = Some((lambda, cv));
            }
        }
    }
    best.map_or(1.0, |(lambda, _)| lambda.max(0.0))
}

fn boxcox_value(y: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        y.ln()
    } else {
        (y.powf(lambda) - 1.0) / lambda
    }
}

fn inv_boxcox_value(w: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        w.exp()
    } else {
        (lambda * w + 1.0).max(INV_BOXCOX_FLOOR).powf(1.0 / lambda)
    }
}

pub fn boxcox(series: &TimeSeries, lambda: f64) -> Result<TimeSeries, SeriesError> {
    if let Some(i) = series.values.iter().position(|&v| v <= 0.0) {
        return Err(SeriesError::NonPositiveValue(i));
    }
    let values = series.values.iter().map(|&y| boxcox_value(y, lambda)).collect();
    TimeSeries::with_start(values, series.start_index)
}

pub fn inv_boxcox(series: &TimeSeries, lambda: f64) -> TimeSeries {
    TimeSeries {
        values: inv_boxcox_values(&series.values, lambda),
        start_index: series.start_index,
    }
}

pub fn inv_boxcox_values(values: &[f64], lambda: f64) -> Vec<f64> {
    values.iter().map(|&w| inv_boxcox_value(w, lambda)).collect()
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Parses one observation per line, either `value` or `timestamp,value`.
/// Blank lines and lines starting with `#` are skipped, as is a leading
/// header line whose value column is not numeric.
pub fn parse_csv(text: &str) -> Result<TimeSeries, SeriesError> {
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() && idx == first_data_line(text) => continue,
            Err(_) => {
                return Err(SeriesError::Parse {
                    line: idx + 1,
                    text: field.to_string(),
                })
            }
        }
    }
    TimeSeries::new(values)
}

fn first_data_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .unwrap_or(0)
}

pub fn read_csv(path: &Path) -> Result<TimeSeries, SeriesError> {
    let io_err = |e: std::io::Error| SeriesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut text = String::new();
    for line in std::io::BufReader::new(file).lines() {
        text.push_str(&line.map_err(io_err)?);
        text.push('\n');
    }
    parse_csv(&text).map_err(|e| match e {
        SeriesError::Io { .. } => e,
        other => SeriesError::Io {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    })
}

/// Single-column CSV, one value per line.
pub fn to_csv(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 12);
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_csv(path: &Path, values: &[f64]) -> Result<(), SeriesError> {
    std::fs::write(path, to_csv(values)).map_err(|e| SeriesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&[1.0, 2.0, 3.0]).is_ok());
        assert_eq!(validate(&[]), Err(SeriesError::Empty));
        assert_eq!(validate(&[1.0, f64::NAN]), Err(SeriesError::NonFinite(1)));
        assert_eq!(validate(&[f64::NEG_INFINITY]), Err(SeriesError::NonFinite(0)));
    }

    #[test]
    fn shift_examples() {
        let (s, c) = shift_positive(&ts(&[1.0, 2.0, 3.0]));
        assert_eq!((s.values(), c), (&[1.0, 2.0, 3.0][..], 0.0));
        let (s, c) = shift_positive(&ts(&[0.0, 5.0]));
        assert_eq!((s.values(), c), (&[1.0, 6.0][..], 1.0));
        let (s, c) = shift_positive(&ts(&[-2.0, 0.0, 3.0]));
        assert_eq!((s.values(), c), (&[1.0, 3.0, 6.0][..], 3.0));
    }

    #[test]
    fn boxcox_examples() {
        let e = std::f64::consts::E;
        assert_relative_eq!(boxcox(&ts(&[e]), 0.0).unwrap().values()[0], 1.0);
        assert_eq!(boxcox(&ts(&[5.0]), 1.0).unwrap().values(), &[4.0]);
        assert_relative_eq!(boxcox(&ts(&[4.0]), 0.5).unwrap().values()[0], 2.0);
        assert_eq!(boxcox(&ts(&[1.0, 0.0]), 0.5), Err(SeriesError::NonPositiveValue(1)));
    }

    #[test]
    fn inv_boxcox_examples() {
        assert_relative_eq!(inv_boxcox(&ts(&[1.0]), 0.0).values()[0], std::f64::consts::E);
        assert_eq!(inv_boxcox(&ts(&[4.0]), 1.0).values(), &[5.0]);
        let x = ts(&[0.5, 7.0, 19.0]);
        let back = inv_boxcox(&boxcox(&x, 0.3).unwrap(), 0.3);
        for (a, b) in back.values().iter().zip(x.values()) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn inv_boxcox_clamps_out_of_domain() {
        let out = inv_boxcox(&ts(&[-10.0]), 0.5);
        assert!(out.values()[0].is_finite());
        assert!(out.values()[0] >= 0.0);
    }

    #[test]
    fn guerrero_too_short_is_identity() {
        assert_eq!(estimate_lambda_guerrero(&ts(&[1.0, 2.0, 3.0]), 4), 1.0);
    }

    #[test]
    fn guerrero_constant_is_identity() {
        assert_eq!(estimate_lambda_guerrero(&ts(&[7.0; 40]), 4), 1.0);
    }

    #[test]
    fn guerrero_is_deterministic() {
        let v: Vec<f64> = (0..60).map(|t| 5.0 + (t as f64 * 0.7).sin() + t as f64 * 0.1).collect();
        let s = ts(&v);
        assert_eq!(
            estimate_lambda_guerrero(&s, 12).to_bits(),
            estimate_lambda_guerrero(&s, 12).to_bits()
        );
    }

    #[test]
    fn csv_parses_both_layouts() {
        let s = parse_csv("# comment\n1.5\n2\n\n3e1\n").unwrap();
        assert_eq!(s.values(), &[1.5, 2.0, 30.0]);
        let s = parse_csv("time,value\n2020-01-01,1\n2020-01-02,2.5\n").unwrap();
        assert_eq!(s.values(), &[1.0, 2.5]);
        assert!(matches!(parse_csv("1\nabc\n"), Err(SeriesError::Parse { line: 2, .. })));
        assert_eq!(parse_csv("# nothing\n"), Err(SeriesError::Empty));
        assert_eq!(parse_csv("1\nNaN\n"), Err(SeriesError::NonFinite(1)));
    }

    #[test]
    fn csv_writer_round_trips() {
        let v = vec![0.1, -2.5, 1e-300, 12345.678];
        assert_eq!(parse_csv(&to_csv(&v)).unwrap().values(), &v[..]);
    }
}
