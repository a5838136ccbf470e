//! Evaluation harness: 80/20 multi-step holdout, repeated timed runs,
//! sMAPE, naive-normalised time-to-result, quadrant tallies and the
//! Friedman rank test.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::config::TelescopeConfig;
use crate::decomposition::continue_periodic;
use crate::pipeline::{forecast, ForecastRequest, Mode};
use crate::recommender::RecommenderModel;
use crate::series::TimeSeries;
use crate::spectral::{dominant_frequencies, SpectralConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error("actual has {actual} values but forecast has {forecast}")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("cannot score an empty forecast")]
    Empty,
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{0}` needs a trained recommender model")]
    MissingRecommender(String),
}

/// sMAPE in percent plus the number of terms skipped for a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smape {
    pub value: f64,
    pub skipped: usize,
}

pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<Smape, BenchmarkError> {
    if actual.len() != forecast.len() {
        return Err(BenchmarkError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(BenchmarkError::Empty);
    }
    let (mut sum, mut used, mut skipped) = (0.0, 0usize, 0usize);
    for (&y, &f) in actual.iter().zip(forecast) {
        let denom = y + f;
        if y == f {
            used += 1;
        } else if denom == 0.0 {
            skipped += 1;
        } else {
            sum += (y - f).abs() / denom;
            used += 1;
        }
    }
    let value = if used == 0 { 0.0 } else { 200.0 * sum / used as f64 };
    Ok(Smape { value, skipped })
}

/// Last observation repeated `horizon` times.
pub fn naive_forecast(values: &[f64], horizon: usize) -> Vec<f64> {
    vec![values.last().copied().unwrap_or(0.0); horizon]
}

/// Last detected cycle repeated; the naive forecast when no season is found.
pub fn seasonal_naive_forecast(series: &TimeSeries, horizon: usize, spectral: &SpectralConfig) -> Vec<f64> {
    let freqs = dominant_frequencies(series, spectral);
    if freqs.is_seasonal() && series.len() >= freqs.dominant() {
        continue_periodic(series.values(), freqs.dominant(), horizon)
    } else {
        naive_forecast(series.values(), horizon)
    }
}

/// A forecasting method under evaluation.
pub trait ForecastMethod: Send + Sync {
    fn name(&self) -> &str;
    fn forecast(&self, history: &TimeSeries, horizon: usize, seed: u64) -> Result<Vec<f64>, String>;
}

type ForecastFn = dyn Fn(&TimeSeries, usize, u64) -> Result<Vec<f64>, String> + Send + Sync;

/// Wraps a closure `(history, horizon, seed) -> forecast` as a method.
pub struct FnMethod {
    name: String,
    f: Box<ForecastFn>,
}

impl FnMethod {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&TimeSeries, usize, u64) -> Result<Vec<f64>, String> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }
}

impl ForecastMethod for FnMethod {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, history: &TimeSeries, horizon: usize, seed: u64) -> Result<Vec<f64>, String> {
        (self.f)(history, horizon, seed)
    }
}

pub const METHOD_NAMES: [&str; 4] = ["telescope", "telescope-star", "naive", "seasonal-naive"];

/// Built-in methods by name. `telescope-star` is the recommended mode and
/// needs a recommender model.
pub fn builtin_method(
    name: &str,
    config: &TelescopeConfig,
    recommender: Option<Arc<RecommenderModel>>,
) -> Result<Box<dyn ForecastMethod>, BenchmarkError> {
    let cfg = *config;
    let method: FnMethod = match name {
        "telescope" => FnMethod::new(name, move |s, h, seed| {
            let req = ForecastRequest {
                series: s.clone(),
                horizon: h,
                mode: Mode::TimeCritical,
                seed,
            };
            forecast(&req, &cfg, None)
                .map(|r| r.forecast.into_values())
                .map_err(|e| e.to_string())
        }),
        "telescope-star" => {
            let model = recommender.ok_or_else(|| BenchmarkError::MissingRecommender(name.into()))?;
            FnMethod::new(name, move |s, h, seed| {
                let req = ForecastRequest {
                    series: s.clone(),
                    horizon: h,
                    mode: Mode::Recommended,
                    seed,
                };
                forecast(&req, &cfg, Some(&model))
                    .map(|r| r.forecast.into_values())
                    .map_err(|e| e.to_string())
            })
        }
        "naive" => FnMethod::new(name, |s, h, _| Ok(naive_forecast(s.values(), h))),
        "seasonal-naive" => FnMethod::new(name, move |s, h, _| Ok(seasonal_naive_forecast(s, h, &cfg.spectral))),
        other => return Err(BenchmarkError::UnknownMethod(other.to_string())),
    };
    Ok(Box::new(method))
}

/// Source of elapsed-time measurements.
pub trait Clock: Send + Sync {
    fn measure(&self, work: &mut dyn FnMut()) -> Duration;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn measure(&self, work: &mut dyn FnMut()) -> Duration {
        let start = Instant::now();
        work();
        start.elapsed()
    }
}

/// Runs the work but reports a fixed duration, for reproducible reports.
pub struct FakeClock(pub Duration);

impl Clock for FakeClock {
    fn measure(&self, work: &mut dyn FnMut()) -> Duration {
        work();
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub history_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            history_fraction: 0.8,
            repetitions: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub rep: usize,
    pub smape: f64,
    pub seconds: f64,
    pub t_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    QI,
    QII,
    QIII,
    QIV,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::QI, Quadrant::QII, Quadrant::QIII, Quadrant::QIV];

    /// Closed lower bounds: a point on a median belongs to the upper side.
    pub fn classify(t_n: f64, error: f64, median_t_n: f64, median_error: f64) -> Self {
        match (t_n >= median_t_n, error >= median_error) {
            (true, true) => Quadrant::QI,
            (false, true) => Quadrant::QII,
            (false, false) => Quadrant::QIII,
            (true, false) => Quadrant::QIV,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrant::QI => "QI",
            Quadrant::QII => "QII",
            Quadrant::QIII => "QIII",
            Quadrant::QIV => "QIV",
        }
    }
}

/// Results of one method on one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub series: String,
    pub method: String,
    pub reps: Vec<Repetition>,
    pub mean_smape: f64,
    pub sd_smape: f64,
    pub mean_t_n: f64,
    pub sd_t_n: f64,
    /// Median run time over the median naive time.
    pub t_n: f64,
    pub error: Option<String>,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_smape: f64,
    pub median_smape: f64,
    pub sd_smape: f64,
    pub mean_t_n: f64,
    pub median_t_n: f64,
    pub sd_t_n: f64,
    pub failures: usize,
    pub quadrants: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub protocol: EvalProtocol,
    pub methods: Vec<String>,
    pub series: Vec<String>,
    pub cells: Vec<Cell>,
    pub median_smape: f64,
    pub median_t_n: f64,
    pub summaries: Vec<MethodSummary>,
    pub friedman_error: FriedmanResult,
    pub friedman_time: FriedmanResult,
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Ranks within one row (1 = smallest), ties get the average rank.
pub fn average_ranks(row: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && row[idx[j + 1]] == row[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test over `rows` (one row per series, one column per method,
/// smaller is better), with the chi-squared approximation for the p-value.
pub fn friedman(rows: &[Vec<f64>]) -> FriedmanResult {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mut sums = vec![0.0; k];
    for row in rows {
        for (s, r) in sums.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
    }
    let mean_ranks: Vec<f64> = sums.iter().map(|s| s / n.max(1) as f64).collect();
    if n == 0 || k < 2 {
        return FriedmanResult {
            mean_ranks,
            statistic: 0.0,
            p_value: 1.0,
            n,
            k,
        };
    }
    let (nf, kf) = (n as f64, k as f64);
    let centre = (kf + 1.0) / 2.0;
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * mean_ranks.iter().map(|r| (r - centre).powi(2)).sum::<f64>();
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        ChiSquared::new(kf - 1.0).map_or(f64::NAN, |d| d.sf(statistic))
    };
    FriedmanResult {
        mean_ranks,
        statistic,
        p_value,
        n,
        k,
    }
}

fn duration_floor(d: Duration) -> f64 {
    d.as_secs_f64().max(1e-9)
}

fn run_series(
    name: &str,
    series: &TimeSeries,
    methods: &[Box<dyn ForecastMethod>],
    protocol: &EvalProtocol,
    clock: &dyn Clock,
) -> Vec<Cell> {
    let history = ((series.len() as f64) * protocol.history_fraction).floor() as usize;
    let split = series.split_at(history.clamp(1, series.len().saturating_sub(1).max(1)));
    let Ok((head, tail)) = split else {
        return methods
            .iter()
            .map(|m| failed_cell(name, m.name(), "series too short to split".into()))
            .collect();
    };
    let horizon = tail.len();

    let naive_times: Vec<f64> = (0..protocol.repetitions)
        .map(|_| {
            duration_floor(clock.measure(&mut || {
                std::hint::black_box(naive_forecast(head.values(), horizon));
            }))
        })
        .collect();
    let naive_time = median(&naive_times);

    methods
        .iter()
        .map(|method| {
            let mut reps = Vec::with_capacity(protocol.repetitions);
            for rep in 0..protocol.repetitions {
                let seed = protocol.seed.wrapping_add(rep as u64);
                let mut outcome = None;
                let elapsed = clock.measure(&mut || {
                    outcome = Some(method.forecast(&head, horizon, seed));
                });
                let fc = match outcome.expect("measured work ran") {
                    Ok(fc) => fc,
                    Err(e) => return failed_cell(name, method.name(), e),
                };
                let score = match smape(tail.values(), &fc) {
                    Ok(s) => s.value,
                    Err(e) => return failed_cell(name, method.name(), e.to_string()),
                };
                let seconds = duration_floor(elapsed);
                reps.push(Repetition {
                    rep,
                    smape: score,
                    seconds,
                    t_n: seconds / naive_time,
                });
            }
            let errors: Vec<f64> = reps.iter().map(|r| r.smape).collect();
            let times: Vec<f64> = reps.iter().map(|r| r.t_n).collect();
            let secs: Vec<f64> = reps.iter().map(|r| r.seconds).collect();
            Cell {
                series: name.to_string(),
                method: method.name().to_string(),
                mean_smape: mean(&errors),
                sd_smape: sd(&errors),
                mean_t_n: mean(&times),
                sd_t_n: sd(&times),
                t_n: median(&secs) / naive_time,
                reps,
                error: None,
                quadrant: Quadrant::QI,
            }
        })
        .collect()
}

fn failed_cell(series: &str, method: &str, error: String) -> Cell {
    Cell {
        series: series.to_string(),
        method: method.to_string(),
        reps: Vec::new(),
        mean_smape: f64::NAN,
        sd_smape: f64::NAN,
        mean_t_n: f64::NAN,
        sd_t_n: f64::NAN,
        t_n: f64::NAN,
        error: Some(error),
        quadrant: Quadrant::QI,
    }
}

/// Evaluates every method on every series. Series are processed in
/// parallel on the current rayon pool; the cells of one series run
/// sequentially on one worker so their timings are not co-scheduled.
pub fn run(
    series: &[(String, TimeSeries)],
    methods: &[Box<dyn ForecastMethod>],
    protocol: &EvalProtocol,
    clock: &dyn Clock,
) -> Result<BenchmarkReport, BenchmarkError> {
    if !(protocol.history_fraction > 0.0 && protocol.history_fraction < 1.0) {
        return Err(BenchmarkError::InvalidProtocol(
            "history fraction must be in (0, 1)".into(),
        ));
    }
    if protocol.repetitions == 0 {
        return Err(BenchmarkError::InvalidProtocol(
            "at least one repetition is required".into(),
        ));
    }
    let per_series: Vec<Vec<Cell>> = series
        .par_iter()
        .map(|(name, s)| run_series(name, s, methods, protocol, clock))
        .collect();

    let ok: Vec<&Cell> = per_series.iter().flatten().filter(|c| c.error.is_none()).collect();
    let median_smape = median(&ok.iter().map(|c| c.mean_smape).collect::<Vec<_>>());
    let median_t_n = median(&ok.iter().map(|c| c.t_n).collect::<Vec<_>>());

    let mut cells: Vec<Cell> = per_series.into_iter().flatten().collect();
    for c in cells.iter_mut() {
        c.quadrant = if c.error.is_some() {
            Quadrant::QI
        } else {
            Quadrant::classify(c.t_n, c.mean_smape, median_t_n, median_smape)
        };
    }

    let k = methods.len();
    let method_names: Vec<String> = methods.iter().map(|m| m.name().to_string()).collect();
    let summaries = method_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mine: Vec<&Cell> = cells.iter().skip(j).step_by(k.max(1)).collect();
            let good: Vec<&&Cell> = mine.iter().filter(|c| c.error.is_none()).collect();
            let errors: Vec<f64> = good.iter().map(|c| c.mean_smape).collect();
            let times: Vec<f64> = good.iter().map(|c| c.t_n).collect();
            let mut quadrants = [0; 4];
            for c in &mine {
                quadrants[c.quadrant as usize] += 1;
            }
            MethodSummary {
                method: name.clone(),
                mean_smape: mean(&errors),
                median_smape: median(&errors),
                sd_smape: sd(&errors),
                mean_t_n: mean(&times),
                median_t_n: median(&times),
                sd_t_n: sd(&times),
                failures: mine.len() - good.len(),
                quadrants,
            }
        })
        .collect();

    let matrix = |f: &dyn Fn(&Cell) -> f64| -> Vec<Vec<f64>> {
        cells
            .chunks(k.max(1))
            .map(|row| {
                row.iter()
                    .map(|c| if c.error.is_none() { f(c) } else { f64::INFINITY })
                    .collect()
            })
            .collect()
    };
    let friedman_error = friedman(&matrix(&|c| c.mean_smape));
    let friedman_time = friedman(&matrix(&|c| c.t_n));

    Ok(BenchmarkReport {
        protocol: *protocol,
        methods: method_names,
        series: series.iter().map(|(n, _)| n.clone()).collect(),
        cells,
        median_smape,
        median_t_n,
        summaries,
        friedman_error,
        friedman_time,
    })
}

impl BenchmarkReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// One line per repetition (failed cells get one line with the error).
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("series,method,rep,smape,seconds,t_n,error\n");
        for c in &self.cells {
            match &c.error {
                Some(e) => {
                    let _ = writeln!(out, "{},{},,,,,{}", c.series, c.method, e.replace([',', '\n'], ";"));
                }
                None => {
                    for r in &c.reps {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},",
                            c.series, c.method, r.rep, r.smape, r.seconds, r.t_n
                        );
                    }
                }
            }
        }
        out
    }

    /// Per-method accuracy and time-to-result, one row per method.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "method,mean_smape,median_smape,sd_smape,mean_t_n,median_t_n,sd_t_n,mean_rank_error,mean_rank_time,failures\n",
        );
        for (j, s) in self.summaries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.method,
                s.mean_smape,
                s.median_smape,
                s.sd_smape,
                s.mean_t_n,
                s.median_t_n,
                s.sd_t_n,
                self.friedman_error.mean_ranks.get(j).copied().unwrap_or(f64::NAN),
                self.friedman_time.mean_ranks.get(j).copied().unwrap_or(f64::NAN),
                s.failures
            );
        }
        out
    }

    /// Quadrant tallies, one row per method.
    pub fn quadrant_csv(&self) -> String {
        let mut out = format!(
            "# median_smape={},median_t_n={}\nmethod,QI,QII,QIII,QIV\n",
            self.median_smape, self.median_t_n
        );
        for s in &self.summaries {
            let q = s.quadrants;
            let _ = writeln!(out, "{},{},{},{},{}", s.method, q[0], q[1], q[2], q[3]);
        }
        out
    }

    pub fn friedman_csv(&self) -> String {
        let mut out = String::from("measure,statistic,p_value,n,k\n");
        for (label, f) in [("error", &self.friedman_error), ("time", &self.friedman_time)] {
            let _ = writeln!(out, "{label},{},{},{},{}", f.statistic, f.p_value, f.n, f.k);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smape_examples() {
        assert_eq!(smape(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        assert_eq!(smape(&[1.0], &[3.0]).unwrap().value, 100.0);
        assert_eq!(smape(&[0.0], &[0.0]).unwrap().value, 0.0);
        let skipped = smape(&[1.0, -2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(skipped.skipped, 1);
        assert_eq!(skipped.value, 0.0);
        assert!(matches!(
            smape(&[1.0], &[1.0, 2.0]),
            Err(BenchmarkError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn naive_examples() {
        assert_eq!(naive_forecast(&[1.0, 2.0, 3.0], 2), vec![3.0, 3.0]);
        assert_eq!(naive_forecast(&[4.0], 1), vec![4.0]);
        assert_eq!(naive_forecast(&[5.0; 4], 3), vec![5.0; 3]);
    }

    #[test]
    fn quadrant_boundaries() {
        assert_eq!(Quadrant::classify(2.0, 10.0, 2.0, 10.0), Quadrant::QI);
        assert_eq!(Quadrant::classify(1.0, 10.0, 2.0, 10.0), Quadrant::QII);
        assert_eq!(Quadrant::classify(1.0, 9.0, 2.0, 10.0), Quadrant::QIII);
        assert_eq!(Quadrant::classify(3.0, 9.0, 2.0, 10.0), Quadrant::QIV);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[f64::INFINITY, 0.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn friedman_all_ties() {
        let rows = vec![vec![1.0, 1.0]; 10];
        let f = friedman(&rows);
        assert_eq!(f.mean_ranks, vec![1.5, 1.5]);
        assert_eq!(f.statistic, 0.0);
        assert_eq!(f.p_value, 1.0);
    }

    #[test]
    fn friedman_dominance() {
        // A always best, B and C alternate
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    vec![1.0, 2.0, 3.0]
                } else {
                    vec![1.0, 3.0, 2.0]
                }
            })
            .collect();
        let f = friedman(&rows);
        assert_eq!(f.mean_ranks, vec![1.0, 2.5, 2.5]);
        let expected = 12.0 * 20.0 / 12.0 * (1.0 + 0.25 + 0.25);
        assert!((f.statistic - expected).abs() < 1e-9);
        assert!((f.p_value - (-expected / 2.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn fake_clock_report_is_reproducible() {
        let series: Vec<(String, TimeSeries)> = (0..4)
            .map(|i| {
                let v = (0..60).map(|t| 10.0 + ((t + i) % 6) as f64).collect();
                (format!("s{i}"), TimeSeries::new(v).unwrap())
            })
            .collect();
        let cfg = TelescopeConfig::default();
        let methods: Vec<Box<dyn ForecastMethod>> = ["naive", "seasonal-naive"]
            .iter()
            .map(|n| builtin_method(n, &cfg, None).unwrap())
            .collect();
        let protocol = EvalProtocol {
            repetitions: 3,
            ..Default::default()
        };
        let clock = FakeClock(Duration::from_millis(2));
        let a = run(&series, &methods, &protocol, &clock).unwrap();
        let b = run(&series, &methods, &protocol, &clock).unwrap();
        assert_eq!(a.cells_csv(), b.cells_csv());
        assert_eq!(a.summary_csv(), b.summary_csv());
        for s in &a.summaries {
            assert_eq!(s.quadrants.iter().sum::<usize>(), 4);
        }
        // seasonal naive is exact on a clean cycle
        assert_eq!(a.summary("seasonal-naive").unwrap().mean_smape, 0.0);
        assert!(a.summary("naive").unwrap().mean_smape > 0.0);
    }

    #[test]
    fn failures_are_recorded() {
        let series = vec![("x".to_string(), TimeSeries::new(vec![1.0; 20]).unwrap())];
        let methods: Vec<Box<dyn ForecastMethod>> = vec![
            Box::new(FnMethod::new("broken", |_, _, _| Err("boom".into()))),
            Box::new(FnMethod::new("short", |_, _, _| Ok(vec![1.0]))),
        ];
        let r = run(&series, &methods, &EvalProtocol::default(), &SystemClock).unwrap();
        assert_eq!(r.cells[0].error.as_deref(), Some("boom"));
        assert!(r.cells[1].error.is_some());
        assert_eq!(r.summaries[0].quadrants, [1, 0, 0, 0]);
        assert!(builtin_method("telescope-star", &TelescopeConfig::default(), None).is_err());
    }
}
