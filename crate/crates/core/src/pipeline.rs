//! Window-by-window analysis and the canonical metric table.
//!
//! First pass (parallel over windows): mutual-information matrix, node
//! strengths, centralities and modularity; matrices are dropped as soon as
//! their measures are extracted. A sequential pass then fixes the run-wide
//! histogram grid and derives every per-window predictor series.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::Result;
use crate::graph::{
    betweenness_centrality, eigenvector_centrality, modularity, DistanceTransform, Summary,
};
use crate::mi::{mi_matrix_from_columns, BinRule, MiMatrix, MiMode};
use crate::panel::HourWindow;
use crate::predictors::{kld_series, moments, rs_series, Horizon, MetricSeries};
use crate::strength::{node_strengths, strength_histogram, StrengthGrid};

/// Knobs for the per-window analysis and the predictor series.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub bin_rule: BinRule,
    pub mi_mode: MiMode,
    /// Feed per-window log returns instead of raw prices into the MI step.
    pub use_returns: bool,
    /// Strength-histogram bin width.
    pub histogram_width: f64,
    /// KLD smoothing epsilon.
    pub epsilon: f64,
    /// Finite KLD/RS horizons; the all-prior variant is always included.
    pub horizons: Vec<usize>,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    pub distance_transform: DistanceTransform,
    pub modularity_seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            bin_rule: BinRule::EqualWidthBins(12),
            mi_mode: MiMode::Standard,
            use_returns: false,
            histogram_width: 10.0,
            epsilon: 1e-10,
            horizons: vec![3, 6, 9, 13],
            eig_tol: 1e-9,
            eig_max_iter: 1000,
            distance_transform: DistanceTransform::Reciprocal,
            modularity_seed: 0,
        }
    }
}

/// Everything extracted from one window's network.
#[derive(Debug, Clone)]
pub struct WindowMeasures {
    pub window_index: usize,
    pub strengths: Vec<f64>,
    pub eigenvector: Summary,
    pub betweenness: Summary,
    pub modularity_q: f64,
}

/// Per-window measures plus the shared grid and histograms.
#[derive(Debug)]
pub struct WindowAnalysis {
    pub measures: Vec<WindowMeasures>,
    pub grid: StrengthGrid,
    pub histograms: Vec<Vec<f64>>,
}

impl WindowAnalysis {
    pub fn mean_strengths(&self) -> Vec<f64> {
        self.measures
            .iter()
            .map(|m| m.strengths.iter().sum::<f64>() / m.strengths.len() as f64)
            .collect()
    }
}

/// Analyze every window. `on_matrix` (when given) sees each window's MI
/// matrix before it is dropped; it must be safe to call from worker
/// threads.
pub fn analyze_windows(
    windows: &[HourWindow],
    options: &AnalysisOptions,
    on_matrix: Option<&(dyn Fn(&MiMatrix) -> Result<()> + Sync)>,
) -> Result<WindowAnalysis> {
    let measures: Vec<WindowMeasures> = windows
        .par_iter()
        .map(|window| {
            let data: Array2<f64> = if options.use_returns {
                window.log_returns()
            } else {
                window.prices.clone()
            };
            let matrix =
                mi_matrix_from_columns(window.window_index, &data, &options.bin_rule, options.mi_mode)?;
            if let Some(callback) = on_matrix {
                callback(&matrix)?;
            }
            let strengths = node_strengths(&matrix);
            let eigenvector =
                eigenvector_centrality(&matrix, options.eig_tol, options.eig_max_iter)?.summary;
            let betweenness =
                betweenness_centrality(&matrix, options.distance_transform)?.summary;
            let modularity_q = modularity(&matrix, options.modularity_seed)?.q;
            Ok(WindowMeasures {
                window_index: window.window_index,
                strengths,
                eigenvector,
                betweenness,
                modularity_q,
            })
        })
        .collect::<Result<_>>()?;

    let max_strength = measures
        .iter()
        .flat_map(|m| m.strengths.iter().copied())
        .fold(0.0f64, f64::max);
    let grid = StrengthGrid::covering(max_strength, options.histogram_width)?;
    let histograms = measures
        .iter()
        .map(|m| strength_histogram(&m.strengths, &grid))
        .collect::<Result<_>>()?;

    Ok(WindowAnalysis {
        measures,
        grid,
        histograms,
    })
}

/// Canonical metric column names for the given horizons, in table order.
pub fn metric_names(horizons: &[usize]) -> Vec<String> {
    let mut names = Vec::new();
    for s in horizons {
        names.push(format!("kld_{s}"));
    }
    names.push("kld_all".into());
    for s in horizons {
        names.push(format!("rs_{s}"));
    }
    names.push("rs_all".into());
    for fixed in [
        "mean",
        "variance",
        "skewness",
        "kurtosis",
        "eig_mean",
        "eig_median",
        "eig_max",
        "btw_mean",
        "btw_median",
        "btw_max",
        "modularity",
    ] {
        names.push(fixed.into());
    }
    names
}

/// All predictor series in canonical order: KLD-s, RS-s, strength moments,
/// centrality summaries and modularity.
pub fn metric_table(analysis: &WindowAnalysis, options: &AnalysisOptions) -> Result<Vec<MetricSeries>> {
    let mut table = Vec::new();
    for &s in &options.horizons {
        table.push(kld_series(
            &analysis.histograms,
            Horizon::Steps(s),
            options.epsilon,
        )?);
    }
    table.push(kld_series(&analysis.histograms, Horizon::All, options.epsilon)?);

    let ads = analysis.mean_strengths();
    for &s in &options.horizons {
        table.push(rs_series(&ads, Horizon::Steps(s))?);
    }
    table.push(rs_series(&ads, Horizon::All)?);

    let n = analysis.measures.len();
    let mut mean = Vec::with_capacity(n);
    let mut variance = Vec::with_capacity(n);
    let mut skewness = Vec::with_capacity(n);
    let mut kurtosis = Vec::with_capacity(n);
    for m in &analysis.measures {
        let stats = moments(&m.strengths)?;
        mean.push(Some(stats.mean));
        variance.push(Some(stats.variance));
        skewness.push(stats.skewness);
        kurtosis.push(stats.kurtosis);
    }
    table.push(MetricSeries::new("mean", mean));
    table.push(MetricSeries::new("variance", variance));
    table.push(MetricSeries::new("skewness", skewness));
    table.push(MetricSeries::new("kurtosis", kurtosis));

    let pick = |f: &dyn Fn(&WindowMeasures) -> f64| -> Vec<Option<f64>> {
        analysis.measures.iter().map(|m| Some(f(m))).collect()
    };
    table.push(MetricSeries::new("eig_mean", pick(&|m| m.eigenvector.mean)));
    table.push(MetricSeries::new("eig_median", pick(&|m| m.eigenvector.median)));
    table.push(MetricSeries::new("eig_max", pick(&|m| m.eigenvector.max)));
    table.push(MetricSeries::new("btw_mean", pick(&|m| m.betweenness.mean)));
    table.push(MetricSeries::new("btw_median", pick(&|m| m.betweenness.median)));
    table.push(MetricSeries::new("btw_max", pick(&|m| m.betweenness.max)));
    table.push(MetricSeries::new("modularity", pick(&|m| m.modularity_q)));

    debug_assert_eq!(
        table.iter().map(|s| s.name.clone()).collect::<Vec<_>>(),
        metric_names(&options.horizons)
    );
    Ok(table)
}
