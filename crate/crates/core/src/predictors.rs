//! Per-window scalar predictors built from the strength distributions:
//! divergence from the recent past (KLD-s), relative strength (RS-s),
//! distribution moments and optimized linear combinations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::regress::{polyfit, RegressionKind};

/// A named per-window series. Entries are None for windows that lack the
/// history the metric needs (for example the first s windows of KLD-s).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn defined(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(t, v)| v.map(|v| (t, v)))
    }
}

/// Number of prior windows aggregated into the reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Steps(usize),
    All,
}

impl Horizon {
    pub fn label(&self) -> String {
        match self {
            Horizon::Steps(s) => s.to_string(),
            Horizon::All => "all".to_string(),
        }
    }

    /// First window index (0-based) at which the metric is defined.
    fn first_defined(&self) -> usize {
        match self {
            Horizon::Steps(s) => *s,
            Horizon::All => 1,
        }
    }

    fn prior_range(&self, t: usize) -> std::ops::Range<usize> {
        match self {
            Horizon::Steps(s) => t - s..t,
            Horizon::All => 0..t,
        }
    }
}

/// Bin-wise arithmetic mean of histograms on a shared grid.
pub fn prior_average(histograms: &[&[f64]]) -> Result<Vec<f64>> {
    let first = histograms
        .first()
        .ok_or_else(|| Error::InvalidArgument("prior average needs at least one histogram".into()))?;
    let bins = first.len();
    let mut mean = vec![0.0; bins];
    for h in histograms {
        if h.len() != bins {
            return Err(Error::GridMismatch {
                left: bins,
                right: h.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(h.iter()) {
            *m += v;
        }
    }
    let count = histograms.len() as f64;
    for m in &mut mean {
        *m /= count;
    }
    Ok(mean)
}

/// Kullback-Leibler divergence of p from q in nats, after additive
/// epsilon smoothing and renormalization of both histograms.
///
/// Smoothing keeps bins where q is empty but p has mass finite, which is
/// exactly where the interesting right-shift events land. Rounding within
/// -1e-12 of zero is clamped to zero.
pub fn kld(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::GridMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing epsilon {epsilon} must be positive"
        )));
    }
    let norm_p: f64 = p.iter().sum::<f64>() + epsilon * p.len() as f64;
    let norm_q: f64 = q.iter().sum::<f64>() + epsilon * q.len() as f64;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let sp = (pi + epsilon) / norm_p;
        let sq = (qi + epsilon) / norm_q;
        if sp > 0.0 {
            total += sp * (sp / sq).ln();
        }
    }
    if total < 0.0 && total > -1e-12 {
        total = 0.0;
    }
    Ok(total)
}

/// KLD of each window's strength histogram from the average of its prior
/// windows' histograms.
pub fn kld_series(histograms: &[Vec<f64>], horizon: Horizon, epsilon: f64) -> Result<MetricSeries> {
    let first = horizon.first_defined();
    if histograms.len() < first + 1 {
        return Err(Error::TooFewWindows {
            needed: first + 1,
            have: histograms.len(),
            horizon: horizon.label(),
        });
    }
    let values: Vec<Option<f64>> = (0..histograms.len())
        .map(|t| {
            if t < first {
                return Ok(None);
            }
            let priors: Vec<&[f64]> = histograms[horizon.prior_range(t)]
                .iter()
                .map(|h| h.as_slice())
                .collect();
            let reference = prior_average(&priors)?;
            kld(&histograms[t], &reference, epsilon).map(Some)
        })
        .collect::<Result<_>>()?;
    Ok(MetricSeries::new(format!("kld_{}", horizon.label()), values))
}

/// Relative strength: each window's mean node strength divided by the mean
/// of the prior windows' mean strengths.
pub fn rs_series(mean_strengths: &[f64], horizon: Horizon) -> Result<MetricSeries> {
    let first = horizon.first_defined();
    if mean_strengths.len() < first + 1 {
        return Err(Error::TooFewWindows {
            needed: first + 1,
            have: mean_strengths.len(),
            horizon: horizon.label(),
        });
    }
    let values: Vec<Option<f64>> = (0..mean_strengths.len())
        .map(|t| {
            if t < first {
                return Ok(None);
            }
            let range = horizon.prior_range(t);
            let count = range.len() as f64;
            let prior_mean = mean_strengths[range].iter().sum::<f64>() / count;
            if prior_mean <= 0.0 {
                return Err(Error::ZeroPriorStrength { window: t + 1 });
            }
            Ok(Some(mean_strengths[t] / prior_mean))
        })
        .collect::<Result<_>>()?;
    Ok(MetricSeries::new(format!("rs_{}", horizon.label()), values))
}

/// Summary moments of a raw strength vector.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub mean: f64,
    /// Sample variance (n - 1 denominator).
    pub variance: f64,
    /// Standardized third central moment; None when the variance vanishes.
    pub skewness: Option<f64>,
    /// Standardized fourth central moment, non-excess; None when the
    /// variance vanishes.
    pub kurtosis: Option<f64>,
}

/// Mean, sample variance, skewness and kurtosis of the raw strengths.
pub fn moments(values: &[f64]) -> Result<Moments> {
    let n = values.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, min: 2 });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    // Near-constant vectors have no meaningful shape.
    let degenerate = m2.sqrt() <= 1e-12 * (1.0 + mean.abs());
    let (skewness, kurtosis) = if degenerate {
        (None, None)
    } else {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    };
    Ok(Moments {
        mean,
        variance,
        skewness,
        kurtosis,
    })
}

/// Pointwise a*A + (1-a)*B; undefined wherever either input is undefined.
pub fn combine(a: f64, series_a: &MetricSeries, series_b: &MetricSeries) -> Result<MetricSeries> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!(
            "mixing constant {a} must lie in [0, 1]"
        )));
    }
    if series_a.len() != series_b.len() {
        return Err(Error::LengthMismatch {
            left: series_a.len(),
            right: series_b.len(),
        });
    }
    let values = series_a
        .values
        .iter()
        .zip(&series_b.values)
        .map(|(va, vb)| match (va, vb) {
            (Some(va), Some(vb)) => Some(a * va + (1.0 - a) * vb),
            _ => None,
        })
        .collect();
    Ok(MetricSeries::new(
        format!("{:.3}*{} + {:.3}*{}", a, series_a.name, 1.0 - a, series_b.name),
        values,
    ))
}

/// A mixed predictor with its optimized mixing constant.
#[derive(Debug, Clone)]
pub struct CombinedPredictor {
    pub name_a: String,
    pub name_b: String,
    /// Optimal mixing constant.
    pub a: f64,
    pub kind: RegressionKind,
    /// R-squared achieved at the optimum.
    pub r_squared: f64,
    pub series: MetricSeries,
    /// Defined, aligned samples used by each fit.
    pub samples: usize,
}

fn fit_combined(
    a: f64,
    series_a: &MetricSeries,
    series_b: &MetricSeries,
    target: &[f64],
    kind: RegressionKind,
) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, &y) in target.iter().enumerate() {
        if let (Some(Some(va)), Some(Some(vb))) =
            (series_a.values.get(t), series_b.values.get(t))
        {
            xs.push(a * va + (1.0 - a) * vb);
            ys.push(y);
        }
    }
    polyfit(&xs, &ys, kind.degree()).ok().map(|f| f.r_squared)
}

/// Exhaustive grid search for the mixing constant maximizing the fit of
/// `target` on a*A + (1-a)*B. Ties break toward smaller a.
pub fn grid_search_a(
    series_a: &MetricSeries,
    series_b: &MetricSeries,
    target: &[f64],
    kind: RegressionKind,
    step: f64,
) -> Result<CombinedPredictor> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} must lie in (0, 1]"
        )));
    }
    let steps_f = 1.0 / step;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-9 || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} must divide [0, 1] evenly"
        )));
    }
    let samples = target
        .iter()
        .enumerate()
        .filter(|(t, _)| {
            matches!(series_a.values.get(*t), Some(Some(_)))
                && matches!(series_b.values.get(*t), Some(Some(_)))
        })
        .count();
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "combined series has no defined overlap with the target".into(),
        ));
    }

    let scored: Vec<(usize, Option<f64>)> = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let a = i as f64 * step;
            (i, fit_combined(a, series_a, series_b, target, kind))
        })
        .collect();

    // Deterministic reduction: best score first, then the smaller a.
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scored {
        if let Some(score) = score {
            let better = match best {
                None => true,
                Some((_, best_score)) => score > best_score,
            };
            if better {
                best = Some((i, score));
            }
        }
    }
    let (best_i, best_score) =
        best.ok_or_else(|| Error::InvalidArgument("no grid point produced a valid fit".into()))?;
    let a = best_i as f64 * step;
    Ok(CombinedPredictor {
        name_a: series_a.name.clone(),
        name_b: series_b.name.clone(),
        a,
        kind,
        r_squared: best_score,
        series: combine(a, series_a, series_b)?,
        samples,
    })
}
