//! Non-seasonal ARIMA with stepwise AICc order search, used for the trend
//! component and for series without a usable season.
//!
//! Estimation is conditional sum of squares with the mean (or drift) fixed
//! at the sample mean of the differenced series.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_P: usize = 5;
pub const MAX_Q: usize = 5;
pub const MAX_D: usize = 2;
pub const MIN_LENGTH: usize = 10;

/// 5% critical value of the Dickey-Fuller tau statistic with a constant.
const ADF_CRITICAL: f64 = -2.86;
const ROOT_MARGIN: f64 = 1e-6;
const SIGMA2_FLOOR: f64 = 1e-12;
const LM_MAX_ITERS: usize = 100;
const LM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArimaError {
    #[error("series of length {got} is too short, need at least {needed}")]
    TooShort { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// One model tried during the order search; `aicc` is `None` when the fit
/// failed or violated stationarity/invertibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub order: ArimaOrder,
    pub aicc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    /// Mean of the differenced series (the drift when d = 1).
    pub intercept: f64,
    pub sigma2: f64,
    pub aicc: f64,
    pub trace: Vec<SearchStep>,
}

impl ArimaFit {
    /// Fit with given coefficients and no search history, for callers that
    /// already know the model.
    pub fn fixed(order: ArimaOrder, ar_coeffs: Vec<f64>, ma_coeffs: Vec<f64>, intercept: f64) -> Self {
        assert_eq!(ar_coeffs.len(), order.p, "AR coefficient count");
        assert_eq!(ma_coeffs.len(), order.q, "MA coefficient count");
        Self {
            order,
            ar_coeffs,
            ma_coeffs,
            intercept,
            sigma2: SIGMA2_FLOOR,
            aicc: f64::NAN,
            trace: Vec::new(),
        }
    }

    /// Long-run mean of a stationary fit on the differenced scale.
    pub fn implied_mean(&self) -> f64 {
        self.intercept
    }
}

/// `d`-fold first differences.
pub fn difference(values: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    if values.len() <= d {
        return Err(ArimaError::TooShort {
            needed: d + 1,
            got: values.len(),
        });
    }
    let mut out = values.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Inverse of one differencing step, anchored at the last undifferenced value.
fn integrate(anchor: f64, diffs: &[f64]) -> Vec<f64> {
    let mut level = anchor;
    diffs
        .iter()
        .map(|d| {
            level += d;
            level
        })
        .collect()
}

fn is_constant(values: &[f64]) -> bool {
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    values.iter().all(|v| (v - values[0]).abs() <= 1e-9 * scale)
}

struct Ols {
    beta: DVector<f64>,
    sse: f64,
    /// Diagonal of (X'X)^-1.
    inv_diag: Vec<f64>,
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Ols> {
    if x.nrows() <= x.ncols() {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax.is_nan() || smax <= 0.0 || svd.singular_values.min() <= 1e-10 * smax {
        return None;
    }
    let beta = svd.solve(y, 0.0).ok()?;
    let resid = y - x * &beta;
    let v_t = svd.v_t.as_ref()?;
    let inv_diag = (0..x.ncols())
        .map(|j| {
            svd.singular_values
                .iter()
                .enumerate()
                .map(|(k, s)| (v_t[(k, j)] / s).powi(2))
                .sum()
        })
        .collect();
    Some(Ols {
        beta,
        sse: resid.norm_squared(),
        inv_diag,
    })
}

/// Augmented Dickey-Fuller tau statistic (constant, `lags` lagged
/// differences). `None` when the regression is degenerate.
pub fn adf_statistic(values: &[f64], lags: usize) -> Option<f64> {
    let dy: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let rows = dy.len().checked_sub(lags)?;
    let cols = 2 + lags;
    if rows <= cols + 1 {
        return None;
    }
    let x = DMatrix::from_fn(rows, cols, |r, c| {
        let t = r + lags;
        match c {
            0 => 1.0,
            1 => values[t],
            _ => dy[t - (c - 1)],
        }
    });
    let y = DVector::from_fn(rows, |r, _| dy[r + lags]);
    let fit = ols(&x, &y)?;
    let s2 = (fit.sse / (rows - cols) as f64).max(f64::MIN_POSITIVE);
    let tau = fit.beta[1] / (s2 * fit.inv_diag[1]).sqrt();
    tau.is_finite().then_some(tau)
}

/// Number of differences needed: difference while the unit-root hypothesis
/// is not rejected at 5%, stopping at a constant series or at `MAX_D`.
pub fn select_differencing(values: &[f64]) -> usize {
    let mut current = values.to_vec();
    for d in 0..MAX_D {
        if is_constant(&current) {
            return d;
        }
        let lags = ((current.len() - 1) as f64).cbrt().trunc() as usize;
        match adf_statistic(&current, lags) {
            Some(tau) if tau < ADF_CRITICAL => return d,
            _ => {}
        }
        current = current.windows(2).map(|w| w[1] - w[0]).collect();
        if current.len() < 3 {
            return d + 1;
        }
    }
    MAX_D
}

/// Whether `1 - c_1 z - ... - c_k z^k` has all roots outside the unit circle
/// (with margin), by Levinson step-down on the reflection coefficients.
pub fn roots_outside_unit_circle(coeffs: &[f64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&k) = a.last() {
        if !k.is_finite() || k.abs() >= 1.0 - ROOT_MARGIN {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        a = (0..m - 1).map(|i| (a[i] + k * a[m - 2 - i]) / denom).collect();
    }
    true
}

fn admissible(ar: &[f64], ma: &[f64]) -> bool {
    let neg_ma: Vec<f64> = ma.iter().map(|t| -t).collect();
    roots_outside_unit_circle(ar) && roots_outside_unit_circle(&neg_ma)
}

/// CSS residuals of the centred series; the first `p` are zero.
fn css_residuals(x: &[f64], ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; x.len()];
    for t in p..x.len() {
        let mut v = x[t];
        for (i, phi) in ar.iter().enumerate() {
            v -= phi * x[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                v -= theta * e[t - 1 - j];
            }
        }
        e[t] = v;
    }
    e
}

/// Sum of squared residuals from `start` on; every candidate order uses the
/// same `start` so their likelihoods cover the same observations.
fn css(x: &[f64], ar: &[f64], ma: &[f64], start: usize) -> f64 {
    css_residuals(x, ar, ma)[start..].iter().map(|v| v * v).sum()
}

/// Observations held back to initialise the AR recursion, shared by all
/// orders fitted to a series of `len` differenced values.
fn conditioning(len: usize) -> usize {
    MAX_P.min(len / 4)
}

/// Hannan-Rissanen starting values: long AR for innovations, then one
/// regression on lagged values and lagged innovations.
fn hannan_rissanen(x: &[f64], p: usize, q: usize) -> Option<Vec<f64>> {
    let n = x.len();
    let long = ((10.0 * (n as f64).log10()) as usize).min(n / 4).max(p + q);
    let mut e = vec![0.0; n];
    if q > 0 {
        let rows = n.checked_sub(long)?;
        let xm = DMatrix::from_fn(rows, long, |r, c| x[r + long - 1 - c]);
        let y = DVector::from_fn(rows, |r, _| x[r + long]);
        let fit = ols(&xm, &y)?;
        for t in long..n {
            e[t] = x[t] - (0..long).map(|c| fit.beta[c] * x[t - 1 - c]).sum::<f64>();
        }
    }
    let start = if q > 0 { long + q } else { p };
    let rows = n.checked_sub(start)?;
    let xm = DMatrix::from_fn(rows, p + q, |r, c| {
        let t = r + start;
        if c < p {
            x[t - 1 - c]
        } else {
            e[t - 1 - (c - p)]
        }
    });
    let y = DVector::from_fn(rows, |r, _| x[r + start]);
    Some(ols(&xm, &y)?.beta.iter().copied().collect())
}

/// CSS residuals from `cond` on and their derivatives with respect to the
/// AR then MA coefficients, by the same recursion as the residuals.
fn css_jacobian(x: &[f64], ar: &[f64], ma: &[f64], cond: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (p, n) = (ar.len(), x.len());
    let k = p + ma.len();
    let e = css_residuals(x, ar, ma);
    // row-major: the derivatives at time t occupy jac[t * k..(t + 1) * k]
    let mut jac = vec![0.0; n * k];
    for t in p..n {
        for c in 0..k {
            let mut v = if c < p {
                -x[t - 1 - c]
            } else if t > c - p {
                -e[t - 1 - (c - p)]
            } else {
                0.0
            };
            for (j, theta) in ma.iter().enumerate().take(t) {
                v -= theta * jac[(t - 1 - j) * k + c];
            }
            jac[t * k + c] = v;
        }
    }
    (
        DMatrix::from_row_slice(n - cond, k, &jac[cond * k..]),
        DVector::from_column_slice(&e[cond..]),
    )
}

/// Levenberg-Marquardt on the CSS objective, starting from Hannan-Rissanen
/// estimates. Steps leaving the stationary and invertible region are
/// rejected like steps that increase the cost.
fn optimise(x: &[f64], p: usize, q: usize, cond: usize, warm: Option<&ArimaFit>) -> Option<Vec<f64>> {
    let k = p + q;
    let resized = |v: &[f64], len: usize| -> Vec<f64> { (0..len).map(|i| v.get(i).copied().unwrap_or(0.0)).collect() };
    let warm = warm.map(|f| [resized(&f.ar_coeffs, p), resized(&f.ma_coeffs, q)].concat());
    let (mut beta, mut cost) = [hannan_rissanen(x, p, q), warm, Some(vec![0.0; k])]
        .into_iter()
        .flatten()
        .filter(|b| b.iter().all(|v| v.is_finite()) && admissible(&b[..p], &b[p..]))
        .map(|b| {
            let c = css(x, &b[..p], &b[p..], cond);
            (b, c)
        })
        .filter(|(_, c)| c.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let mut damping = 1e-3;
    for _ in 0..LM_MAX_ITERS {
        let (jm, ev) = css_jacobian(x, &beta[..p], &beta[p..], cond);
        let jtj = jm.tr_mul(&jm);
        let grad = jm.tr_mul(&ev);
        let mut improved = false;
        while damping < 1e12 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += damping * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                damping *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + s).collect();
            let (ar, ma) = cand.split_at(p);
            let c = if admissible(ar, ma) {
                css(x, ar, ma, cond)
            } else {
                f64::INFINITY
            };
            if c.is_finite() && c <= cost {
                let gain = cost - c;
                beta = cand;
                cost = c;
                damping = (damping / 3.0).max(1e-12);
                improved = gain > LM_TOLERANCE * cost.max(f64::MIN_POSITIVE);
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Some(beta)
}

/// Fits one order by CSS. `None` when the series is too short for the
/// order or the optimum is not stationary and invertible.
pub fn fit_order(values: &[f64], order: ArimaOrder) -> Option<ArimaFit> {
    fit_order_from(values, order, None)
}

/// As [`fit_order`], also trying the coefficients of `warm` (padded or cut
/// to the new order) as a starting point.
fn fit_order_from(values: &[f64], order: ArimaOrder, warm: Option<&ArimaFit>) -> Option<ArimaFit> {
    let w = difference(values, order.d).ok()?;
    let with_mean = order.d <= 1;
    let mu = if with_mean {
        w.iter().sum::<f64>() / w.len() as f64
    } else {
        0.0
    };
    let x: Vec<f64> = w.iter().map(|v| v - mu).collect();
    let (p, q) = (order.p, order.q);
    let start = conditioning(x.len());
    if p > start {
        return None;
    }
    let n_eff = x.len() - start;
    let k = p + q + usize::from(with_mean) + 1;
    if n_eff < k + 2 {
        return None;
    }
    let params = if p + q == 0 {
        Vec::new()
    } else if is_constant(&x) {
        vec![0.0; p + q]
    } else {
        optimise(&x, p, q, start, warm)?
    };
    let (ar, ma) = params.split_at(p);
    if !admissible(ar, ma) {
        return None;
    }
    let sse = css(&x, ar, ma, start);
    if !sse.is_finite() {
        return None;
    }
    let n = n_eff as f64;
    let sigma2 = (sse / n).max(SIGMA2_FLOOR);
    let loglik = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let kf = k as f64;
    let aicc = -2.0 * loglik + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (n - kf - 1.0);
    Some(ArimaFit {
        order,
        ar_coeffs: ar.to_vec(),
        ma_coeffs: ma.to_vec(),
        intercept: mu,
        sigma2,
        aicc,
        trace: Vec::new(),
    })
}

/// Chooses d by unit-root testing, then (p, q) by stepwise AICc search
/// within p, q ≤ 5. Falls back to (0, d, 0) when nothing else fits.
pub fn auto_arima(values: &[f64]) -> Result<ArimaFit, ArimaError> {
    if values.len() < MIN_LENGTH {
        return Err(ArimaError::TooShort {
            needed: MIN_LENGTH,
            got: values.len(),
        });
    }
    let d = select_differencing(values);
    let mut trace = Vec::new();
    let mut tried = HashSet::new();
    let mut best: Option<ArimaFit> = None;

    let mut consider = |p: usize, q: usize, best: &mut Option<ArimaFit>, trace: &mut Vec<SearchStep>| -> bool {
        if p > MAX_P || q > MAX_Q || !tried.insert((p, q)) {
            return false;
        }
        let order = ArimaOrder::new(p, d, q);
        let fit = fit_order_from(values, order, best.as_ref());
        trace.push(SearchStep {
            order,
            aicc: fit.as_ref().map(|f| f.aicc),
        });
        match fit {
            Some(f) if best.as_ref().is_none_or(|b| f.aicc < b.aicc) => {
                *best = Some(f);
                true
            }
            _ => false,
        }
    };

    for (p, q) in [(2, 2), (1, 1), (0, 0), (1, 0), (0, 1)] {
        consider(p, q, &mut best, &mut trace);
    }
    while let Some(current) = best.as_ref().map(|b| (b.order.p, b.order.q)) {
        let mut improved = false;
        for (dp, dq) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)] {
            let (p, q) = (current.0 as i64 + dp, current.1 as i64 + dq);
            if p < 0 || q < 0 {
                continue;
            }
            improved |= consider(p as usize, q as usize, &mut best, &mut trace);
        }
        if !improved {
            break;
        }
    }

    let mut fit = match best {
        Some(f) => f,
        None => {
            let w = difference(values, d)?;
            let mu = if d <= 1 {
                w.iter().sum::<f64>() / w.len() as f64
            } else {
                0.0
            };
            let sse: f64 = w.iter().map(|v| (v - mu).powi(2)).sum();
            ArimaFit {
                order: ArimaOrder::new(0, d, 0),
                ar_coeffs: Vec::new(),
                ma_coeffs: Vec::new(),
                intercept: mu,
                sigma2: (sse / w.len() as f64).max(SIGMA2_FLOOR),
                aicc: f64::INFINITY,
                trace: Vec::new(),
            }
        }
    };
    fit.trace = trace;
    Ok(fit)
}

/// Point forecasts: the ARMA recursion on the differenced scale with zero
/// future shocks, integrated back `d` times.
pub fn forecast_arima(fit: &ArimaFit, values: &[f64], horizon: usize) -> Vec<f64> {
    let d = fit.order.d;
    let mut levels = vec![values.to_vec()];
    for _ in 0..d {
        let next = difference(levels.last().unwrap(), 1).unwrap_or_default();
        levels.push(next);
    }
    let w = levels.last().unwrap();
    let mu = fit.intercept;
    let mut x: Vec<f64> = w.iter().map(|v| v - mu).collect();
    let mut e = if x.len() > fit.order.p {
        css_residuals(&x, &fit.ar_coeffs, &fit.ma_coeffs)
    } else {
        vec![0.0; x.len()]
    };
    let mut future = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let t = x.len();
        let mut v = 0.0;
        for (i, phi) in fit.ar_coeffs.iter().enumerate() {
            if t > i {
                v += phi * x[t - 1 - i];
            }
        }
        for (j, theta) in fit.ma_coeffs.iter().enumerate() {
            if t > j {
                v += theta * e[t - 1 - j];
            }
        }
        x.push(v);
        e.push(0.0);
        future.push(v + mu);
    }
    for level in levels[..d].iter().rev() {
        let anchor = level.last().copied().unwrap_or(0.0);
        future = integrate(anchor, &future);
    }
    for v in future.iter_mut() {
        if !v.is_finite() {
            *v = values.last().copied().unwrap_or(0.0);
        }
    }
    future
}
