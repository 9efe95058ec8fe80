//! The pipeline stages behind the subcommands.
//!
//! `metrics` computes everything from raw files; `regress`, `combine` and
//! `arima` reuse the metric table and change series already in the output
//! directory when present, recomputing them otherwise. `report` chains all
//! four. Identical config and data produce byte-identical outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use minet::arima::{fit_arima, grid_search_order, one_step_predictions, ArimaModel};
use minet::panel::{impute_locf, index_changes, load_panel, split_windows, ChangeSeries, PricePanel};
use minet::pipeline::{analyze_windows, metric_table, WindowAnalysis};
use minet::predictors::{grid_search_a, MetricSeries};
use minet::regress::{score_table, RegressionKind};
use minet::synth::write_fixture;
use minet::Error as CoreError;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{self, CombinationRow, ComparisonRow, ModelReport};

/// Run a closure on a worker pool of the configured size (0 = default).
pub fn with_pool<T: Send>(
    parallelism: usize,
    f: impl FnOnce() -> CliResult<T> + Send,
) -> CliResult<T> {
    if parallelism == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| CliError::config(format!("cannot build worker pool: {e}")))?;
    pool.install(f)
}

#[derive(Debug, Serialize)]
struct InputFile {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    parameters: &'a crate::config::Parameters,
    inputs: InputsManifest,
    panel: PanelManifest,
}

#[derive(Debug, Serialize)]
struct InputsManifest {
    files: Vec<InputFile>,
    digest: String,
}

#[derive(Debug, Serialize)]
struct PanelManifest {
    index: String,
    tickers: usize,
    rows: usize,
    missing_cells: usize,
    windows: usize,
    dropped_rows: usize,
    skipped_tickers: Vec<String>,
}

fn hash_inputs(source: &Path) -> CliResult<InputsManifest> {
    let mut paths: Vec<PathBuf> = if source.is_dir() {
        std::fs::read_dir(source)
            .map_err(|e| CliError::io(format!("reading {}", source.display()), e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().map(|e| e == "csv").unwrap_or(false)
                    || p.file_name().map(|n| n == "manifest.toml").unwrap_or(false)
            })
            .collect()
    } else {
        vec![source.to_path_buf()]
    };
    paths.sort();
    let mut files = Vec::with_capacity(paths.len());
    let mut combined = Sha256::new();
    for path in paths {
        let bytes =
            std::fs::read(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let hash = format!("{:x}", Sha256::digest(&bytes));
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        combined.update(name.as_bytes());
        combined.update(b":");
        combined.update(hash.as_bytes());
        combined.update(b"\n");
        files.push(InputFile { name, sha256: hash });
    }
    Ok(InputsManifest {
        files,
        digest: format!("{:x}", combined.finalize()),
    })
}

struct Prepared {
    panel: PricePanel,
    windows: Vec<minet::panel::HourWindow>,
    changes: ChangeSeries,
    closes: Vec<f64>,
    dropped_rows: usize,
    skipped_tickers: Vec<String>,
    inputs: InputsManifest,
}

fn prepare(config: &RunConfig) -> CliResult<Prepared> {
    let inputs = hash_inputs(&config.data)?;
    let loaded = load_panel(&config.data, config.parameters.index.as_deref())?;
    if !loaded.skipped_tickers.is_empty() {
        warn!(
            tickers = loaded.skipped_tickers.join(",").as_str(),
            "skipped tickers with zero usable rows"
        );
    }
    let panel = impute_locf(&loaded.panel)?;
    let split = split_windows(&panel, config.parameters.window_length)?;
    if split.dropped_rows > 0 {
        warn!(rows = split.dropped_rows, "dropped trailing partial window");
    }
    let changes = index_changes(&split.windows, config.parameters.target_lag)?;
    let closes: Vec<f64> = split.windows.iter().map(|w| w.index_close).collect();
    info!(
        tickers = panel.n_tickers(),
        rows = panel.n_rows(),
        windows = split.windows.len(),
        "panel ready"
    );
    Ok(Prepared {
        panel,
        windows: split.windows,
        changes,
        closes,
        dropped_rows: split.dropped_rows,
        skipped_tickers: loaded.skipped_tickers,
        inputs,
    })
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::config(format!("serialization failed: {e}")))
        .map(|mut s| {
            s.push('\n');
            s
        })
}

/// Generate the synthetic fixture into the data directory.
pub fn run_synth(config: &RunConfig) -> CliResult<()> {
    let synth = config
        .parameters
        .synth
        .to_synth_config(config.parameters.window_length);
    let report = write_fixture(&config.data, &synth)?;
    info!(
        files = report.files_written,
        windows = report.n_windows,
        events = report.events.len(),
        dir = %config.data.display(),
        "fixture written"
    );
    Ok(())
}

/// Compute and write the metric table, change series, index closes, run
/// manifest and any configured per-window dumps.
pub fn run_metrics(config: &RunConfig) -> CliResult<()> {
    let prepared = prepare(config)?;
    let options = config.analysis_options()?;
    let tickers: Vec<String> = prepared.panel.tickers().to_vec();

    let out = &config.output;
    let dump_dir = out.join("mi");
    let dump = config.dump_mi_matrices;
    let on_matrix = |m: &minet::mi::MiMatrix| -> minet::Result<()> {
        if dump {
            let text = formats::render_mi_matrix(&tickers, &m.weights);
            let path = dump_dir.join(format!("window_{:04}.csv", m.window_index));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| CoreError::Io {
                    path: parent.to_path_buf(),
                    source: e,
                })?;
            }
            std::fs::write(&path, text).map_err(|e| CoreError::Io { path, source: e })?;
        }
        Ok(())
    };
    let analysis = analyze_windows(&prepared.windows, &options, Some(&on_matrix))?;
    let metrics = metric_table(&analysis, &options)?;

    if config.dump_strengths {
        write_strength_dumps(out, &tickers, &analysis)?;
    }

    formats::write_text(&out.join(formats::METRICS_FILE), &formats::render_metrics(&metrics))?;
    formats::write_text(
        &out.join(formats::CHANGES_FILE),
        &formats::render_changes(&prepared.changes),
    )?;
    formats::write_text(
        &out.join(formats::CLOSES_FILE),
        &formats::render_closes(&prepared.closes),
    )?;
    let manifest = RunManifest {
        parameters: &config.parameters,
        inputs: prepared.inputs,
        panel: PanelManifest {
            index: prepared.panel.index_name().to_string(),
            tickers: prepared.panel.n_tickers(),
            rows: prepared.panel.n_rows(),
            missing_cells: 0,
            windows: prepared.windows.len(),
            dropped_rows: prepared.dropped_rows,
            skipped_tickers: prepared.skipped_tickers,
        },
    };
    formats::write_text(&out.join(formats::MANIFEST_JSON), &to_json(&manifest)?)?;
    info!(metrics = metrics.len(), windows = prepared.windows.len(), "metric table written");
    Ok(())
}

fn write_strength_dumps(
    out: &Path,
    tickers: &[String],
    analysis: &WindowAnalysis,
) -> CliResult<()> {
    for m in &analysis.measures {
        let path = out
            .join("strengths")
            .join(format!("window_{:04}.csv", m.window_index));
        formats::write_text(&path, &formats::render_strengths(tickers, &m.strengths))?;
    }
    Ok(())
}

/// Metric table, change series and closes: parsed from the output
/// directory when already present, recomputed (and written) otherwise.
fn load_or_compute(config: &RunConfig) -> CliResult<(Vec<MetricSeries>, ChangeSeries, Vec<f64>)> {
    let out = &config.output;
    let metrics_path = out.join(formats::METRICS_FILE);
    let changes_path = out.join(formats::CHANGES_FILE);
    let closes_path = out.join(formats::CLOSES_FILE);
    if !(metrics_path.exists() && changes_path.exists() && closes_path.exists()) {
        run_metrics(config)?;
    }
    let metrics = formats::parse_metrics(&metrics_path, &formats::read_text(&metrics_path)?)?;
    let changes = formats::parse_changes(
        &changes_path,
        &formats::read_text(&changes_path)?,
        config.parameters.target_lag,
    )?;
    let closes = formats::parse_closes(&closes_path, &formats::read_text(&closes_path)?)?;
    Ok((metrics, changes, closes))
}

/// Score every metric against the change targets and write the table in
/// both delimited and structured form.
pub fn run_regress(config: &RunConfig) -> CliResult<()> {
    let (metrics, changes, _) = load_or_compute(config)?;
    let rows = score_table(&metrics, &changes);
    for row in &rows {
        if !row.available() {
            warn!(metric = row.metric.as_str(), "score row unavailable");
        }
    }
    formats::write_text(
        &config.output.join(formats::SCORES_CSV),
        &formats::render_score_table(&rows),
    )?;
    formats::write_text(
        &config.output.join(formats::SCORES_JSON),
        &to_json(&formats::score_entries(&rows))?,
    )?;
    info!(rows = rows.len(), "score table written");
    Ok(())
}

fn find_metric<'a>(metrics: &'a [MetricSeries], name: &str) -> CliResult<&'a MetricSeries> {
    metrics.iter().find(|m| m.name == name).ok_or_else(|| {
        CliError::Core(CoreError::UnknownMetric {
            name: name.to_string(),
            available: metrics
                .iter()
                .map(|m| m.name.clone())
                .collect::<Vec<_>>()
                .join(", "),
        })
    })
}

fn zscore(series: &MetricSeries) -> MetricSeries {
    let defined: Vec<f64> = series.defined().map(|(_, v)| v).collect();
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let sd = (defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let values = series
        .values
        .iter()
        .map(|v| v.map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 }))
        .collect();
    MetricSeries::new(series.name.clone(), values)
}

/// Optimize the mixing constant for every configured metric pair.
///
/// Polynomial combinations target the actual changes, the linear one the
/// absolute changes, mirroring how the two combination recipes are used.
pub fn run_combine(config: &RunConfig) -> CliResult<()> {
    let (metrics, changes, _) = load_or_compute(config)?;
    let mut rows = Vec::new();
    for spec in &config.parameters.combine {
        let kind = spec.regression_kind()?;
        let mut series_a = find_metric(&metrics, &spec.a)?.clone();
        let mut series_b = find_metric(&metrics, &spec.b)?.clone();
        if config.parameters.zscore_combine {
            series_a = zscore(&series_a);
            series_b = zscore(&series_b);
        }
        let target: &[f64] = match kind {
            RegressionKind::Linear => &changes.absolute,
            RegressionKind::Poly2 | RegressionKind::Poly3 => &changes.values,
        };
        let best = grid_search_a(&series_a, &series_b, target, kind, config.parameters.grid_step)?;
        info!(
            pair = format!("{} + {}", spec.a, spec.b).as_str(),
            kind = kind.name(),
            a = best.a,
            r_squared = best.r_squared,
            "combination optimized"
        );
        rows.push(CombinationRow {
            metric_a: spec.a.clone(),
            metric_b: spec.b.clone(),
            kind: kind.name().to_string(),
            a: best.a,
            score_r: best.r_squared.sqrt(),
            score_r2: best.r_squared,
            samples: best.samples,
        });
    }
    formats::write_text(
        &config.output.join(formats::COMBINATIONS_FILE),
        &formats::render_combinations(&rows),
    )?;
    Ok(())
}

// Dots instead of commas: the label lands in comma-delimited files.
fn model_label(model: &ArimaModel, exog: Option<&str>) -> String {
    let order = format!("arima({}.{}.{})", model.order.p, model.order.d, model.order.q);
    match exog {
        Some(name) => format!("{order}+{name}"),
        None => order,
    }
}

fn model_report(model: &ArimaModel, label: &str, mse: f64, skipped: Vec<String>) -> ModelReport {
    ModelReport {
        model: label.to_string(),
        order: [model.order.p, model.order.d, model.order.q],
        intercept: model.intercept,
        ar: model.ar.clone(),
        ma: model.ma.clone(),
        exog_coef: model.exog_coef,
        sigma2: model.sigma2,
        log_likelihood: model.log_likelihood,
        aic: model.aic,
        mse,
        n_effective: model.n_effective,
        skipped,
    }
}

/// Exogenous series for the ARIMAX fits: the metric shifted forward by
/// `lag` windows. Returns the first window at which it is defined plus the
/// dense values from there on.
fn exog_values(metric: &MetricSeries, lag: usize, windows: usize) -> CliResult<(usize, Vec<f64>)> {
    let shifted: Vec<Option<f64>> = (0..windows)
        .map(|t| {
            if t < lag {
                None
            } else {
                metric.values.get(t - lag).copied().flatten()
            }
        })
        .collect();
    let first = shifted
        .iter()
        .position(|v| v.is_some())
        .ok_or_else(|| CliError::Core(CoreError::InvalidArgument(format!(
            "metric {} has no defined values",
            metric.name
        ))))?;
    let mut dense = Vec::with_capacity(windows - first);
    for (t, v) in shifted.iter().enumerate().skip(first) {
        match v {
            Some(v) => dense.push(*v),
            None => {
                return Err(CliError::Core(CoreError::InvalidArgument(format!(
                    "metric {} is undefined at window {} after its first defined window",
                    metric.name,
                    t + 1
                ))))
            }
        }
    }
    Ok((first, dense))
}

/// Baseline best-AIC ARIMA plus one ARIMAX per configured exogenous
/// metric; writes the MSE comparison, full model reports and the aligned
/// prediction series.
pub fn run_arima(config: &RunConfig) -> CliResult<()> {
    let (metrics, _, closes) = load_or_compute(config)?;
    let arima_cfg = &config.parameters.arima;

    let selection = grid_search_order(&closes, arima_cfg.bounds(), None)?;
    for (order, reason) in &selection.skipped {
        warn!(order = %order, reason = reason.as_str(), "order skipped during selection");
    }
    let baseline = selection.best;
    let baseline_label = model_label(&baseline, None);
    let baseline_pred = one_step_predictions(&baseline);
    info!(
        model = baseline_label.as_str(),
        aic = baseline.aic,
        mse = baseline_pred.mse,
        "baseline selected"
    );

    let mut labels = vec![baseline_label.clone()];
    let mut comparison = vec![ComparisonRow {
        model: baseline_label.clone(),
        mse: baseline_pred.mse,
    }];
    let mut reports = vec![model_report(
        &baseline,
        &baseline_label,
        baseline_pred.mse,
        selection
            .skipped
            .iter()
            .map(|(order, reason)| format!("{order}: {reason}"))
            .collect(),
    )];
    let mut prediction_columns: Vec<Vec<Option<f64>>> = vec![baseline_pred.predictions.clone()];

    for name in &arima_cfg.exog_metrics {
        let metric = find_metric(&metrics, name)?;
        let (first, exog) = exog_values(metric, arima_cfg.exog_lag, closes.len())?;
        let sliced = &closes[first..];
        let model = match fit_arima(sliced, arima_cfg.exog_arima_order(), Some(&exog)) {
            Ok(model) => model,
            Err(err) => {
                warn!(metric = name.as_str(), error = %err, "exogenous fit failed");
                continue;
            }
        };
        let label = model_label(&model, Some(name));
        let pred = one_step_predictions(&model);
        // Re-align the sliced predictions to full window ordinals.
        let mut aligned = vec![None; closes.len()];
        for (i, p) in pred.predictions.iter().enumerate() {
            aligned[first + i] = *p;
        }
        info!(model = label.as_str(), mse = pred.mse, "exogenous model fitted");
        comparison.push(ComparisonRow {
            model: label.clone(),
            mse: pred.mse,
        });
        reports.push(model_report(&model, &label, pred.mse, Vec::new()));
        prediction_columns.push(aligned);
        labels.push(label);
    }

    let out = &config.output;
    formats::write_text(
        &out.join(formats::ARIMA_COMPARISON_FILE),
        &formats::render_comparison(&comparison),
    )?;
    formats::write_text(&out.join(formats::ARIMA_MODELS_JSON), &to_json(&reports)?)?;
    formats::write_text(
        &out.join(formats::ARIMA_PREDICTIONS_FILE),
        &formats::render_predictions(&labels, &closes, &prediction_columns),
    )?;
    Ok(())
}

/// The whole pipeline: metrics, scores, combinations, ARIMA comparison.
pub fn run_report(config: &RunConfig) -> CliResult<()> {
    run_metrics(config)?;
    run_regress(config)?;
    run_combine(config)?;
    run_arima(config)?;
    Ok(())
}
