//! Least-squares fits of index changes on predictor series.
//!
//! Polynomial designs are solved by Householder QR on an internally
//! centered and scaled predictor, never by normal equations; coefficients
//! are mapped back to the raw scale afterwards.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::panel::ChangeSeries;
use crate::predictors::MetricSeries;

/// Regression family used for scoring and combination search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionKind {
    Linear,
    Poly2,
    Poly3,
}

impl RegressionKind {
    pub fn degree(self) -> usize {
        match self {
            RegressionKind::Linear => 1,
            RegressionKind::Poly2 => 2,
            RegressionKind::Poly3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegressionKind::Linear => "linear",
            RegressionKind::Poly2 => "poly2",
            RegressionKind::Poly3 => "poly3",
        }
    }
}

impl std::str::FromStr for RegressionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(RegressionKind::Linear),
            "poly2" => Ok(RegressionKind::Poly2),
            "poly3" => Ok(RegressionKind::Poly3),
            other => Err(Error::InvalidArgument(format!(
                "unknown regression kind {other:?} (expected linear, poly2 or poly3)"
            ))),
        }
    }
}

/// One ordinary-least-squares fit on a Vandermonde design.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub kind: RegressionKind,
    /// Intercept first, then ascending powers of the raw predictor.
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    /// Sign-aware square root of R-squared; linear fits only.
    pub r: Option<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n: usize,
    /// F-test p-value of the overall fit.
    pub p_value: f64,
}

fn kind_for_degree(degree: usize) -> Result<RegressionKind> {
    match degree {
        1 => Ok(RegressionKind::Linear),
        2 => Ok(RegressionKind::Poly2),
        3 => Ok(RegressionKind::Poly3),
        other => Err(Error::InvalidArgument(format!(
            "unsupported polynomial degree {other}"
        ))),
    }
}

/// Least squares of `y` on `[1, x, ..., x^degree]`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<RegressionFit> {
    let kind = kind_for_degree(degree)?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < degree + 2 {
        return Err(Error::SeriesTooShort {
            len: n,
            min: degree + 2,
        });
    }

    // Center and scale the predictor for conditioning.
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::ConstantPredictor);
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();

    let m = degree + 1;
    let mut design: Vec<Vec<f64>> = z
        .iter()
        .map(|&zi| {
            let mut row = Vec::with_capacity(m);
            let mut p = 1.0;
            for _ in 0..m {
                row.push(p);
                p *= zi;
            }
            row
        })
        .collect();
    let mut rhs = y.to_vec();
    let scaled_coeffs = qr_solve(&mut design, &mut rhs, m)?;

    // Fitted values from the scaled design; residuals from those.
    let fitted: Vec<f64> = z
        .iter()
        .map(|&zi| {
            let mut acc = 0.0;
            let mut p = 1.0;
            for &c in &scaled_coeffs {
                acc += c * p;
                p *= zi;
            }
            acc
        })
        .collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = (1.0 - ss_res / ss_tot).clamp(0.0, 1.0);

    let coefficients = rescale_coefficients(&scaled_coeffs, mean, sd);
    let r = if degree == 1 {
        Some(coefficients[1].signum() * r_squared.sqrt())
    } else {
        None
    };
    let p_value = f_test_p(r_squared, degree, n);

    Ok(RegressionFit {
        kind,
        coefficients,
        r_squared,
        r,
        fitted,
        residuals,
        n,
        p_value,
    })
}

/// Householder QR solve of an n x m least-squares system, in place.
fn qr_solve(design: &mut [Vec<f64>], rhs: &mut [f64], m: usize) -> Result<Vec<f64>> {
    let n = design.len();
    for k in 0..m {
        let norm2: f64 = (k..n).map(|i| design[i][k] * design[i][k]).sum();
        let norm = norm2.sqrt();
        if norm < 1e-10 {
            return Err(Error::RankDeficient(k));
        }
        let alpha = if design[k][k] > 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = design[k][k] - alpha;
        for i in (k + 1)..n {
            v[i - k] = design[i][k];
        }
        let vtv: f64 = v.iter().map(|c| c * c).sum();
        if vtv > 0.0 {
            for j in k..m {
                let dot: f64 = (k..n).map(|i| v[i - k] * design[i][j]).sum();
                let f = 2.0 * dot / vtv;
                for i in k..n {
                    design[i][j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..n).map(|i| v[i - k] * rhs[i]).sum();
            let f = 2.0 * dot / vtv;
            for i in k..n {
                rhs[i] -= f * v[i - k];
            }
        }
    }
    // Back-substitution on the triangular factor.
    let mut beta = vec![0.0; m];
    for k in (0..m).rev() {
        let mut acc = rhs[k];
        for j in (k + 1)..m {
            acc -= design[k][j] * beta[j];
        }
        if design[k][k].abs() < 1e-12 {
            return Err(Error::RankDeficient(k));
        }
        beta[k] = acc / design[k][k];
    }
    Ok(beta)
}

/// Expand a polynomial in z = (x - mean) / sd into coefficients on raw x.
fn rescale_coefficients(scaled: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    let degree = scaled.len() - 1;
    let affine = [-mean / sd, 1.0 / sd];
    let mut out = vec![0.0; degree + 1];
    let mut power = vec![1.0];
    for &c in scaled {
        for (i, &p) in power.iter().enumerate() {
            out[i] += c * p;
        }
        // power <- power * affine
        let mut next = vec![0.0; power.len() + 1];
        for (i, &p) in power.iter().enumerate() {
            next[i] += p * affine[0];
            next[i + 1] += p * affine[1];
        }
        power = next;
    }
    out
}

fn f_test_p(r_squared: f64, degree: usize, n: usize) -> f64 {
    let df2 = n as f64 - degree as f64 - 1.0;
    if df2 <= 0.0 {
        return f64::NAN;
    }
    if r_squared >= 1.0 - 1e-14 {
        return 0.0;
    }
    let f = (r_squared / degree as f64) / ((1.0 - r_squared) / df2);
    match FisherSnedecor::new(degree as f64, df2) {
        Ok(dist) => 1.0 - dist.cdf(f),
        Err(_) => f64::NAN,
    }
}

/// One score cell of the predictor table.
#[derive(Debug, Clone, Copy)]
pub struct Score {
    /// Multiple correlation coefficient, the square root of R-squared.
    pub r: f64,
    pub r_squared: f64,
    pub p_value: f64,
}

impl Score {
    fn from_fit(fit: &RegressionFit) -> Self {
        Score {
            r: fit.r_squared.sqrt(),
            r_squared: fit.r_squared,
            p_value: fit.p_value,
        }
    }
}

/// Scores of one metric against the change targets. Cells are None when
/// the metric has too few defined samples or the fit degenerates.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub metric: String,
    /// Aligned defined samples available to this row.
    pub samples: usize,
    /// Degree-2 polynomial fit against actual changes.
    pub act_poly2: Option<Score>,
    /// Degree-3 polynomial fit against actual changes.
    pub act_poly3: Option<Score>,
    /// Linear fit against squared changes.
    pub sqr_linear: Option<Score>,
    /// Linear fit against absolute changes.
    pub abs_linear: Option<Score>,
}

impl ScoreRow {
    pub fn available(&self) -> bool {
        self.act_poly2.is_some()
            || self.act_poly3.is_some()
            || self.sqr_linear.is_some()
            || self.abs_linear.is_some()
    }
}

fn aligned(metric: &MetricSeries, target: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, &y) in target.iter().enumerate() {
        if let Some(Some(x)) = metric.values.get(t) {
            xs.push(*x);
            ys.push(y);
        }
    }
    (xs, ys)
}

/// Score every metric against actual, squared and absolute changes, in the
/// order the metrics are given.
pub fn score_table(metrics: &[MetricSeries], changes: &ChangeSeries) -> Vec<ScoreRow> {
    metrics
        .iter()
        .map(|metric| {
            let (x_act, y_act) = aligned(metric, &changes.values);
            let (x_sqr, y_sqr) = aligned(metric, &changes.squared);
            let (x_abs, y_abs) = aligned(metric, &changes.absolute);
            let cell = |x: &[f64], y: &[f64], degree: usize| {
                polyfit(x, y, degree).ok().map(|fit| Score::from_fit(&fit))
            };
            ScoreRow {
                metric: metric.name.clone(),
                samples: x_act.len(),
                act_poly2: cell(&x_act, &y_act, 2),
                act_poly3: cell(&x_act, &y_act, 3),
                sqr_linear: cell(&x_sqr, &y_sqr, 1),
                abs_linear: cell(&x_abs, &y_abs, 1),
            }
        })
        .collect()
}
