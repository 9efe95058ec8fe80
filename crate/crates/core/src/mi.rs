//! Per-window discretization and pairwise mutual information.
//!
//! Each series in a window is binned on its own [min, max] range (prices of
//! different stocks live on incomparable scales), then every unordered pair
//! of label series is scored with Shannon mutual information in nats. The
//! per-window result is a symmetric, zero-diagonal weight matrix.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::HourWindow;

/// Discretization rule for one series.
#[derive(Debug, Clone, PartialEq)]
pub enum BinRule {
    /// Equal-width bins, fixed bin count.
    EqualWidthBins(usize),
    /// Equal-width bins, fixed bin width.
    EqualWidth(f64),
    /// Equal-frequency (quantile) bins, fixed bin count.
    EqualFrequency(usize),
}

impl BinRule {
    /// Default rule: 60-sample windows at an average of five samples per bin.
    pub fn default_for_window(window_length: usize) -> Self {
        BinRule::EqualWidthBins(window_length.div_ceil(5).max(2))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BinRule::EqualWidthBins(k) | BinRule::EqualFrequency(k) if *k < 2 => Err(
                Error::InvalidBinRule(format!("bin count {k} must be at least 2")),
            ),
            BinRule::EqualWidth(w) if !(w.is_finite() && *w > 0.0) => Err(Error::InvalidBinRule(
                format!("bin width {w} must be positive"),
            )),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for BinRule {
    type Err = Error;

    /// Accepts `equal-width-count:K`, `equal-width-width:W` and
    /// `equal-frequency:K`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidBinRule(format!("{s:?} is missing a `:value` part")))?;
        let rule = match name {
            "equal-width-count" => BinRule::EqualWidthBins(
                value
                    .parse()
                    .map_err(|_| Error::InvalidBinRule(format!("bad bin count {value:?}")))?,
            ),
            "equal-width-width" => BinRule::EqualWidth(
                value
                    .parse()
                    .map_err(|_| Error::InvalidBinRule(format!("bad bin width {value:?}")))?,
            ),
            "equal-frequency" => BinRule::EqualFrequency(
                value
                    .parse()
                    .map_err(|_| Error::InvalidBinRule(format!("bad bin count {value:?}")))?,
            ),
            other => {
                return Err(Error::InvalidBinRule(format!(
                    "unknown strategy {other:?}"
                )))
            }
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl std::fmt::Display for BinRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BinRule::EqualWidthBins(k) => write!(f, "equal-width-count:{k}"),
            BinRule::EqualWidth(w) => write!(f, "equal-width-width:{w}"),
            BinRule::EqualFrequency(k) => write!(f, "equal-frequency:{k}"),
        }
    }
}

/// How to treat joint cells whose two bin labels coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MiMode {
    /// Standard Shannon mutual information over all populated joint cells.
    #[default]
    Standard,
    /// Drop joint cells with equal labels. Nonstandard; can go negative.
    ExcludeEqualLabels,
}

/// Map a series to integer bin labels.
///
/// Equal-width bins span the series' own [min, max] with a closed upper
/// edge; a constant series maps everything to bin 0. Equal-frequency bins
/// split the rank order into `k` groups, keeping ties in one bin.
pub fn discretize(series: &[f64], rule: &BinRule) -> Vec<usize> {
    debug_assert!(series.iter().all(|v| v.is_finite()));
    if series.is_empty() {
        return Vec::new();
    }
    match rule {
        BinRule::EqualWidthBins(k) => {
            let (min, max) = min_max(series);
            let range = max - min;
            if range <= 0.0 {
                return vec![0; series.len()];
            }
            series
                .iter()
                .map(|v| (((v - min) / range * *k as f64) as usize).min(k - 1))
                .collect()
        }
        BinRule::EqualWidth(width) => {
            let (min, max) = min_max(series);
            if max <= min {
                return vec![0; series.len()];
            }
            let top = ((max - min) / width).ceil() as usize;
            let last = top.saturating_sub(1);
            series
                .iter()
                .map(|v| (((v - min) / width) as usize).min(last))
                .collect()
        }
        BinRule::EqualFrequency(k) => {
            let n = series.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| series[a].total_cmp(&series[b]));
            let mut labels = vec![0usize; n];
            let mut pos = 0;
            while pos < n {
                // Run of equal values gets the label of its first position.
                let mut end = pos + 1;
                while end < n && series[order[end]] == series[order[pos]] {
                    end += 1;
                }
                let label = (pos * *k) / n;
                for &idx in &order[pos..end] {
                    labels[idx] = label;
                }
                pos = end;
            }
            labels
        }
    }
}

fn min_max(series: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in series {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// Shannon mutual information of two label series, in nats.
pub fn mutual_information(x: &[usize], y: &[usize]) -> Result<f64> {
    mutual_information_mode(x, y, MiMode::Standard)
}

/// Mutual information with an explicit joint-cell mode.
///
/// Uses the empirical joint histogram and natural logarithms. In standard
/// mode the result is clamped to zero when rounding leaves it within
/// -1e-12 of zero.
pub fn mutual_information_mode(x: &[usize], y: &[usize], mode: MiMode) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: x.len(),
            min: 2,
        });
    }
    let kx = x.iter().max().unwrap() + 1;
    let ky = y.iter().max().unwrap() + 1;
    let mut joint = vec![0u32; kx * ky];
    let mut mx = vec![0u32; kx];
    let mut my = vec![0u32; ky];
    for (&a, &b) in x.iter().zip(y) {
        joint[a * ky + b] += 1;
        mx[a] += 1;
        my[b] += 1;
    }
    let n = x.len() as f64;
    let ln_n = n.ln();
    let mut sum = 0.0;
    for a in 0..kx {
        for b in 0..ky {
            let c = joint[a * ky + b];
            if c == 0 {
                continue;
            }
            if mode == MiMode::ExcludeEqualLabels && a == b {
                continue;
            }
            let c = c as f64;
            // p log(p / (px py)) with p = c/n, px = mx/n, py = my/n.
            sum += c * (ln_n + c.ln() - (mx[a] as f64).ln() - (my[b] as f64).ln());
        }
    }
    let mut value = sum / n;
    if mode == MiMode::Standard && value < 0.0 && value > -1e-12 {
        value = 0.0;
    }
    Ok(value)
}

/// Symmetric nonnegative mutual-information weight matrix for one window.
/// Node order follows the panel's ticker order.
#[derive(Debug, Clone)]
pub struct MiMatrix {
    /// Window ordinal starting at 1.
    pub window_index: usize,
    /// N x N weights in nats, zero diagonal.
    pub weights: Array2<f64>,
}

impl MiMatrix {
    /// Wrap a raw weight matrix, enforcing symmetry, a zero diagonal and
    /// nonnegativity (entries within -1e-12 of zero are clamped).
    pub fn from_weights(window_index: usize, mut weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::InvalidMatrix("squareness"));
        }
        for i in 0..weights.nrows() {
            if weights[[i, i]] != 0.0 {
                return Err(Error::InvalidMatrix("zero diagonal"));
            }
            for j in (i + 1)..weights.ncols() {
                if weights[[i, j]] != weights[[j, i]] {
                    return Err(Error::InvalidMatrix("symmetry"));
                }
                let w = weights[[i, j]];
                if !w.is_finite() || w < -1e-12 {
                    return Err(Error::InvalidMatrix("nonnegative weights"));
                }
                if w < 0.0 {
                    weights[[i, j]] = 0.0;
                    weights[[j, i]] = 0.0;
                }
            }
        }
        Ok(Self {
            window_index,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }
}

/// Mutual-information matrix for one window: every unordered ticker pair is
/// computed once, in parallel, and mirrored.
pub fn mi_matrix(window: &HourWindow, rule: &BinRule, mode: MiMode) -> Result<MiMatrix> {
    mi_matrix_from_columns(window.window_index, &window.prices, rule, mode)
}

/// Same as [`mi_matrix`] on a raw samples-by-series matrix (used for the
/// returns mode, where the window's prices are pre-transformed).
pub fn mi_matrix_from_columns(
    window_index: usize,
    data: &Array2<f64>,
    rule: &BinRule,
    mode: MiMode,
) -> Result<MiMatrix> {
    rule.validate()?;
    let n = data.ncols();
    if n < 2 {
        return Err(Error::TooFewTickers { found: n });
    }
    let labels: Vec<Vec<usize>> = (0..n)
        .map(|c| discretize(&data.column(c).to_vec(), rule))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| mutual_information_mode(&labels[i], &labels[j], mode))
        .collect::<Result<_>>()?;

    let mut weights = Array2::zeros((n, n));
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        weights[[i, j]] = v;
        weights[[j, i]] = v;
    }
    Ok(MiMatrix {
        window_index,
        weights,
    })
}
