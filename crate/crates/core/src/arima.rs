//! ARIMA(p,d,q) fitting by conditional sum of squares, with an optional
//! exogenous regressor, AIC-based order selection and in-sample one-step
//! predictions.
//!
//! Estimation conditions on the first p observations of the differenced
//! series with pre-sample residuals fixed at zero, and minimizes the CSS
//! with a derivative-free simplex from a fixed start (coefficients zero,
//! intercept at the sample mean). MA coefficients are optimized through a
//! reflection-coefficient reparameterization so every visited point is
//! invertible. Following the usual convention the intercept is only
//! estimated for d = 0; differenced models are fit zero-mean, which makes
//! the ARIMA(0,1,0) one-step prediction exactly the one-lag shift.

use crate::error::{Error, Result};
use crate::optim::{minimize, SimplexOptions};

/// Model order (p, d, q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// A fitted ARIMA model, optionally with one exogenous regressor.
#[derive(Debug, Clone)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    /// Intercept on the differenced scale; None when d > 0.
    pub intercept: Option<f64>,
    /// AR coefficients phi_1..phi_p.
    pub ar: Vec<f64>,
    /// MA coefficients theta_1..theta_q.
    pub ma: Vec<f64>,
    /// Exogenous coefficient when an exogenous series was supplied.
    pub exog_coef: Option<f64>,
    /// Innovation variance, CSS / n_effective.
    pub sigma2: f64,
    /// Conditional log-likelihood.
    pub log_likelihood: f64,
    /// 2k - 2 logLik with k counting every estimated parameter plus sigma2.
    pub aic: f64,
    /// Estimated parameter count used for the AIC, including sigma2.
    pub k: usize,
    /// Residuals on the differenced scale, one per effective observation.
    pub residuals: Vec<f64>,
    /// One-step-ahead predictions on the original scale, aligned with the
    /// modeled series; None for the first d + p entries.
    pub predictions: Vec<Option<f64>>,
    /// Effective observations the CSS was summed over.
    pub n_effective: usize,
    series: Vec<f64>,
}

/// One-step predictions with their mean squared error.
#[derive(Debug, Clone)]
pub struct PredictionReport {
    pub predictions: Vec<Option<f64>>,
    pub mse: f64,
}

/// d-fold first differences; the series shrinks by d.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if d > 2 {
        return Err(Error::InvalidArgument(format!(
            "differencing degree {d} not supported (0, 1 or 2)"
        )));
    }
    if series.len() <= d {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: d + 1,
        });
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// MA coefficients from unconstrained parameters through reflection
/// coefficients, guaranteeing invertibility.
fn ma_from_unconstrained(u: &[f64]) -> Vec<f64> {
    let reflections: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
    let q = reflections.len();
    let mut theta = vec![0.0; q];
    for k in 0..q {
        let r = reflections[k];
        let previous = theta.clone();
        for (j, t) in theta.iter_mut().enumerate().take(k) {
            *t = previous[j] + r * previous[k - 1 - j];
        }
        theta[k] = r;
    }
    theta
}

struct CssProblem<'a> {
    w: &'a [f64],
    exog: Option<&'a [f64]>,
    p: usize,
    q: usize,
    with_intercept: bool,
}

impl CssProblem<'_> {
    fn dim(&self) -> usize {
        usize::from(self.with_intercept) + self.p + self.q + usize::from(self.exog.is_some())
    }

    fn unpack<'p>(&self, params: &'p [f64]) -> (f64, &'p [f64], Vec<f64>, f64) {
        let mut at = 0;
        let intercept = if self.with_intercept {
            at += 1;
            params[0]
        } else {
            0.0
        };
        let phi = &params[at..at + self.p];
        at += self.p;
        let theta = ma_from_unconstrained(&params[at..at + self.q]);
        at += self.q;
        let beta = if self.exog.is_some() { params[at] } else { 0.0 };
        (intercept, phi, theta, beta)
    }

    /// Residual recursion: e_t = z_t - sum phi_i z_{t-i} - sum theta_j e_{t-j},
    /// t from p, pre-sample residuals zero.
    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        let (intercept, phi, theta, beta) = self.unpack(params);
        let m = self.w.len();
        let z: Vec<f64> = (0..m)
            .map(|t| {
                let x = self.exog.map(|x| x[t]).unwrap_or(0.0);
                self.w[t] - intercept - beta * x
            })
            .collect();
        let mut e = vec![0.0; m];
        for t in self.p..m {
            let mut value = z[t];
            for (i, &coef) in phi.iter().enumerate() {
                value -= coef * z[t - 1 - i];
            }
            for (j, &coef) in theta.iter().enumerate() {
                if t >= self.p + 1 + j {
                    value -= coef * e[t - 1 - j];
                }
            }
            e[t] = value;
        }
        e.split_off(self.p)
    }

    fn css(&self, params: &[f64]) -> f64 {
        self.residuals(params).iter().map(|e| e * e).sum()
    }
}

/// Fit ARIMA(p,d,q), optionally with one aligned exogenous regressor that
/// is differenced alongside the series when d > 0.
pub fn fit_arima(series: &[f64], order: ArimaOrder, exog: Option<&[f64]>) -> Result<ArimaModel> {
    let ArimaOrder { p, d, q } = order;
    let min_len = 10 * (p + q + 1);
    if series.len() < min_len.max(d + p + 2) {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: min_len.max(d + p + 2),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    if let Some(x) = exog {
        if x.len() != series.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: series.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("exog contains non-finite values".into()));
        }
    }

    let w = difference(series, d)?;
    let exog_diff = match exog {
        Some(x) => Some(difference(x, d)?),
        None => None,
    };
    let problem = CssProblem {
        w: &w,
        exog: exog_diff.as_deref(),
        p,
        q,
        with_intercept: d == 0,
    };

    let dim = problem.dim();
    let params = if dim == 0 {
        Vec::new()
    } else {
        let mut start = vec![0.0; dim];
        if problem.with_intercept {
            start[0] = w.iter().sum::<f64>() / w.len() as f64;
        }
        // Main simplex run plus a tighter polish from its optimum; the
        // combined iteration budget stays at the 2000 cap.
        let main = minimize(
            |x| problem.css(x),
            &start,
            SimplexOptions {
                max_iter: 1500,
                ftol: 1e-8,
                initial_step: 0.1,
            },
        )?;
        let polish = minimize(
            |x| problem.css(x),
            &main.x,
            SimplexOptions {
                max_iter: 500,
                ftol: 1e-12,
                initial_step: 1e-3,
            },
        )?;
        polish.x
    };

    let (intercept, phi, theta, beta) = problem.unpack(&params);
    // Saturated reflection coefficients put an MA root on the unit circle.
    let ma_slice = {
        let offset = usize::from(problem.with_intercept) + p;
        &params[offset..offset + q]
    };
    if ma_slice.iter().any(|u| u.tanh().abs() >= 1.0 - 1e-12) {
        return Err(Error::NonInvertibleMa);
    }

    let residuals = problem.residuals(&params);
    let css: f64 = residuals.iter().map(|e| e * e).sum();
    if !css.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let n_effective = residuals.len();
    let sigma2 = (css / n_effective as f64).max(f64::MIN_POSITIVE);
    let log_likelihood =
        -0.5 * n_effective as f64 * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0);
    let k = usize::from(problem.with_intercept) + p + q + 1 + usize::from(exog.is_some());
    let aic = 2.0 * k as f64 - 2.0 * log_likelihood;

    // One-step predictions: w_hat_t = w_t - e_t, then undo differencing by
    // adding back lagged actuals.
    let n = series.len();
    let mut predictions = vec![None; n];
    for (offset, e) in residuals.iter().enumerate() {
        let t = p + offset;
        let w_hat = w[t] - e;
        let orig = t + d;
        let value = match d {
            0 => w_hat,
            1 => series[orig - 1] + w_hat,
            2 => w_hat + 2.0 * series[orig - 1] - series[orig - 2],
            _ => unreachable!(),
        };
        predictions[orig] = Some(value);
    }

    Ok(ArimaModel {
        order,
        intercept: problem.with_intercept.then_some(intercept),
        ar: phi.to_vec(),
        ma: theta,
        exog_coef: exog.map(|_| beta),
        sigma2,
        log_likelihood,
        aic,
        k,
        residuals,
        predictions,
        n_effective,
        series: series.to_vec(),
    })
}

/// In-sample one-step-ahead predictions and their MSE over all defined
/// prediction points.
pub fn one_step_predictions(model: &ArimaModel) -> PredictionReport {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, prediction) in model.predictions.iter().enumerate() {
        if let Some(prediction) = prediction {
            let err = model.series[t] - prediction;
            sum += err * err;
            count += 1;
        }
    }
    PredictionReport {
        predictions: model.predictions.clone(),
        mse: if count == 0 { f64::NAN } else { sum / count as f64 },
    }
}

/// Inclusive order bounds for the AIC grid search.
#[derive(Debug, Clone, Copy)]
pub struct GridBounds {
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
}

impl Default for GridBounds {
    fn default() -> Self {
        Self {
            p_max: 3,
            d_max: 2,
            q_max: 3,
        }
    }
}

/// Outcome of the order grid search.
#[derive(Debug)]
pub struct GridSearchReport {
    pub best: ArimaModel,
    /// Orders whose fits failed, with the failure text.
    pub skipped: Vec<(ArimaOrder, String)>,
    pub attempted: usize,
}

/// Fit every order in the box and keep the lowest-AIC model. Ties break
/// toward smaller p+q, then smaller d. Failed fits are skipped and
/// reported.
pub fn grid_search_order(
    series: &[f64],
    bounds: GridBounds,
    exog: Option<&[f64]>,
) -> Result<GridSearchReport> {
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    let mut attempted = 0;
    for d in 0..=bounds.d_max {
        for p in 0..=bounds.p_max {
            for q in 0..=bounds.q_max {
                attempted += 1;
                let order = ArimaOrder::new(p, d, q);
                match fit_arima(series, order, exog) {
                    Ok(model) => fits.push(model),
                    Err(err) => skipped.push((order, err.to_string())),
                }
            }
        }
    }
    if fits.is_empty() {
        return Err(Error::AllFitsFailed { attempted });
    }
    fits.sort_by(|a, b| {
        a.aic
            .total_cmp(&b.aic)
            .then_with(|| (a.order.p + a.order.q).cmp(&(b.order.p + b.order.q)))
            .then_with(|| a.order.d.cmp(&b.order.d))
            .then_with(|| a.order.p.cmp(&b.order.p))
    });
    Ok(GridSearchReport {
        best: fits.swap_remove(0),
        skipped,
        attempted,
    })
}
