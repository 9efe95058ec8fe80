//! Output file formats and their parsers.
//!
//! Everything is header-first delimited text (or JSON for the manifest and
//! model reports). Floats are written with the shortest round-trip
//! representation, so parsing an output file reproduces the exact values;
//! undefined entries are empty fields.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use minet::panel::ChangeSeries;
use minet::predictors::MetricSeries;
use minet::regress::{Score, ScoreRow};

use crate::error::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHANGES_FILE: &str = "changes.csv";
pub const CLOSES_FILE: &str = "index_closes.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const SCORES_CSV: &str = "score_table.csv";
pub const SCORES_JSON: &str = "score_table.json";
pub const COMBINATIONS_FILE: &str = "combinations.csv";
pub const ARIMA_COMPARISON_FILE: &str = "arima_comparison.csv";
pub const ARIMA_MODELS_JSON: &str = "arima_models.json";
pub const ARIMA_PREDICTIONS_FILE: &str = "arima_predictions.csv";

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

fn bad(path: &Path, message: impl Into<String>) -> CliError {
    CliError::BadOutputFile {
        file: path.display().to_string(),
        message: message.into(),
    }
}

fn parse_field(path: &Path, raw: &str) -> CliResult<Option<f64>> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| bad(path, format!("bad numeric field {raw:?}")))
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

// ---- metric table ----

/// One row per window, one column per metric; undefined entries empty.
pub fn render_metrics(metrics: &[MetricSeries]) -> String {
    let mut out = String::from("window");
    for m in metrics {
        out.push(',');
        out.push_str(&m.name);
    }
    out.push('\n');
    let rows = metrics.first().map(|m| m.len()).unwrap_or(0);
    for t in 0..rows {
        let _ = write!(out, "{}", t + 1);
        for m in metrics {
            out.push(',');
            out.push_str(&opt(m.values[t]));
        }
        out.push('\n');
    }
    out
}

pub fn parse_metrics(path: &Path, text: &str) -> CliResult<Vec<MetricSeries>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    let mut names = header.split(',');
    if names.next() != Some("window") {
        return Err(bad(path, "first column must be `window`"));
    }
    let names: Vec<&str> = names.collect();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let window: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad(path, format!("row {}: bad window ordinal", i + 1)))?;
        if window != i + 1 {
            return Err(bad(path, format!("row {}: out-of-order window {window}", i + 1)));
        }
        let mut count = 0;
        for (c, field) in fields.enumerate() {
            if c >= columns.len() {
                return Err(bad(path, format!("row {}: too many fields", i + 1)));
            }
            columns[c].push(parse_field(path, field)?);
            count += 1;
        }
        if count != columns.len() {
            return Err(bad(path, format!("row {}: expected {} fields", i + 1, columns.len())));
        }
    }
    Ok(names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| MetricSeries::new(name, values))
        .collect())
}

// ---- change series ----

pub fn render_changes(changes: &ChangeSeries) -> String {
    let mut out = String::from("window,delta,absolute,squared\n");
    for t in 0..changes.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t + 1,
            changes.values[t],
            changes.absolute[t],
            changes.squared[t]
        );
    }
    out
}

pub fn parse_changes(path: &Path, text: &str, lag: usize) -> CliResult<ChangeSeries> {
    let mut values = Vec::new();
    let mut absolute = Vec::new();
    let mut squared = Vec::new();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    if header != "window,delta,absolute,squared" {
        return Err(bad(path, "unexpected header"));
    }
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(path, "expected 4 fields per row"));
        }
        values.push(
            parse_field(path, fields[1])?.ok_or_else(|| bad(path, "missing delta"))?,
        );
        absolute.push(
            parse_field(path, fields[2])?.ok_or_else(|| bad(path, "missing absolute"))?,
        );
        squared.push(
            parse_field(path, fields[3])?.ok_or_else(|| bad(path, "missing squared"))?,
        );
    }
    Ok(ChangeSeries {
        lag,
        values,
        absolute,
        squared,
    })
}

// ---- index closes ----

pub fn render_closes(closes: &[f64]) -> String {
    let mut out = String::from("window,close\n");
    for (t, c) in closes.iter().enumerate() {
        let _ = writeln!(out, "{},{}", t + 1, c);
    }
    out
}

pub fn parse_closes(path: &Path, text: &str) -> CliResult<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next() != Some("window,close") {
        return Err(bad(path, "unexpected header"));
    }
    lines
        .map(|line| {
            let raw = line
                .split_once(',')
                .map(|(_, v)| v)
                .ok_or_else(|| bad(path, "expected 2 fields per row"))?;
            parse_field(path, raw)?.ok_or_else(|| bad(path, "missing close"))
        })
        .collect()
}

// ---- score table ----

const SCORE_COLUMNS: [&str; 4] = ["act_poly2", "act_poly3", "sqr_linear", "abs_linear"];

fn score_cells(score: &Option<Score>) -> String {
    match score {
        Some(s) => format!("{},{},{}", s.r, s.r_squared, s.p_value),
        None => ",,".to_string(),
    }
}

/// Both the multiple correlation (root of R-squared) and R-squared are
/// emitted per fit, plus the F-test p-value.
pub fn render_score_table(rows: &[ScoreRow]) -> String {
    let mut out = String::from("metric,samples");
    for column in SCORE_COLUMNS {
        let _ = write!(out, ",{column}_r,{column}_r2,{column}_p");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{}", row.metric, row.samples);
        for cell in [&row.act_poly2, &row.act_poly3, &row.sqr_linear, &row.abs_linear] {
            out.push(',');
            out.push_str(&score_cells(cell));
        }
        out.push('\n');
    }
    out
}

pub fn parse_score_table(path: &Path, text: &str) -> CliResult<Vec<ScoreRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    if !header.starts_with("metric,samples,") {
        return Err(bad(path, "unexpected header"));
    }
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + 12 {
            return Err(bad(path, "expected 14 fields per row"));
        }
        let samples: usize = fields[1]
            .parse()
            .map_err(|_| bad(path, "bad sample count"))?;
        let mut cells = Vec::with_capacity(4);
        for c in 0..4 {
            let r = parse_field(path, fields[2 + 3 * c])?;
            let r2 = parse_field(path, fields[3 + 3 * c])?;
            let p = parse_field(path, fields[4 + 3 * c])?;
            cells.push(match (r, r2, p) {
                (Some(r), Some(r_squared), Some(p_value)) => Some(Score {
                    r,
                    r_squared,
                    p_value,
                }),
                (None, None, None) => None,
                _ => return Err(bad(path, "partially filled score cell")),
            });
        }
        rows.push(ScoreRow {
            metric: fields[0].to_string(),
            samples,
            act_poly2: cells[0],
            act_poly3: cells[1],
            sqr_linear: cells[2],
            abs_linear: cells[3],
        });
    }
    Ok(rows)
}

/// Structured score entries for the JSON twin of the table.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub metric: String,
    pub column: String,
    pub r: f64,
    pub r_squared: f64,
    pub p_value: f64,
}

pub fn score_entries(rows: &[ScoreRow]) -> Vec<ScoreEntry> {
    let mut entries = Vec::new();
    for row in rows {
        for (column, cell) in SCORE_COLUMNS
            .iter()
            .zip([&row.act_poly2, &row.act_poly3, &row.sqr_linear, &row.abs_linear])
        {
            if let Some(score) = cell {
                entries.push(ScoreEntry {
                    metric: row.metric.clone(),
                    column: column.to_string(),
                    r: score.r,
                    r_squared: score.r_squared,
                    p_value: score.p_value,
                });
            }
        }
    }
    entries
}

// ---- combination report ----

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationRow {
    pub metric_a: String,
    pub metric_b: String,
    pub kind: String,
    pub a: f64,
    pub score_r: f64,
    pub score_r2: f64,
    pub samples: usize,
}

pub fn render_combinations(rows: &[CombinationRow]) -> String {
    let mut out = String::from("metric_a,metric_b,kind,a,score_r,score_r2,samples\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.metric_a, row.metric_b, row.kind, row.a, row.score_r, row.score_r2, row.samples
        );
    }
    out
}

pub fn parse_combinations(path: &Path, text: &str) -> CliResult<Vec<CombinationRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("metric_a,metric_b,kind,a,score_r,score_r2,samples") {
        return Err(bad(path, "unexpected header"));
    }
    lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(bad(path, "expected 7 fields per row"));
            }
            Ok(CombinationRow {
                metric_a: fields[0].into(),
                metric_b: fields[1].into(),
                kind: fields[2].into(),
                a: parse_field(path, fields[3])?.ok_or_else(|| bad(path, "missing a"))?,
                score_r: parse_field(path, fields[4])?.ok_or_else(|| bad(path, "missing score"))?,
                score_r2: parse_field(path, fields[5])?
                    .ok_or_else(|| bad(path, "missing score"))?,
                samples: fields[6].parse().map_err(|_| bad(path, "bad sample count"))?,
            })
        })
        .collect()
}

// ---- ARIMA outputs ----

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub mse: f64,
}

pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("model,mse\n");
    for row in rows {
        let _ = writeln!(out, "{},{}", row.model, row.mse);
    }
    out
}

pub fn parse_comparison(path: &Path, text: &str) -> CliResult<Vec<ComparisonRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("model,mse") {
        return Err(bad(path, "unexpected header"));
    }
    lines
        .map(|line| {
            let (model, mse) = line
                .split_once(',')
                .ok_or_else(|| bad(path, "expected 2 fields per row"))?;
            Ok(ComparisonRow {
                model: model.to_string(),
                mse: parse_field(path, mse)?.ok_or_else(|| bad(path, "missing mse"))?,
            })
        })
        .collect()
}

/// Full model report, one entry per fitted model.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub order: [usize; 3],
    pub intercept: Option<f64>,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub exog_coef: Option<f64>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub mse: f64,
    pub n_effective: usize,
    /// Non-convergent orders skipped during selection, with reasons.
    pub skipped: Vec<String>,
}

/// Prediction series per model, aligned to window ordinals.
pub fn render_predictions(
    models: &[String],
    actuals: &[f64],
    predictions: &[Vec<Option<f64>>],
) -> String {
    let mut out = String::from("window,actual");
    for model in models {
        out.push(',');
        out.push_str(model);
    }
    out.push('\n');
    for t in 0..actuals.len() {
        let _ = write!(out, "{},{}", t + 1, actuals[t]);
        for series in predictions {
            out.push(',');
            out.push_str(&opt(series.get(t).copied().flatten()));
        }
        out.push('\n');
    }
    out
}

pub fn parse_predictions(
    path: &Path,
    text: &str,
) -> CliResult<(Vec<String>, Vec<f64>, Vec<Vec<Option<f64>>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    let mut columns = header.split(',');
    if columns.next() != Some("window") || columns.next() != Some("actual") {
        return Err(bad(path, "unexpected header"));
    }
    let models: Vec<String> = columns.map(|c| c.to_string()).collect();
    let mut actuals = Vec::new();
    let mut predictions: Vec<Vec<Option<f64>>> = vec![Vec::new(); models.len()];
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + models.len() {
            return Err(bad(path, "wrong field count"));
        }
        actuals.push(parse_field(path, fields[1])?.ok_or_else(|| bad(path, "missing actual"))?);
        for (c, series) in predictions.iter_mut().enumerate() {
            series.push(parse_field(path, fields[2 + c])?);
        }
    }
    Ok((models, actuals, predictions))
}

// ---- MI matrix and strength dumps ----

pub fn render_mi_matrix(tickers: &[String], weights: &ndarray::Array2<f64>) -> String {
    let mut out = String::from("ticker");
    for t in tickers {
        out.push(',');
        out.push_str(t);
    }
    out.push('\n');
    for (i, ticker) in tickers.iter().enumerate() {
        out.push_str(ticker);
        for j in 0..tickers.len() {
            out.push(',');
            let _ = write!(out, "{}", weights[[i, j]]);
        }
        out.push('\n');
    }
    out
}

pub fn parse_mi_matrix(path: &Path, text: &str) -> CliResult<(Vec<String>, ndarray::Array2<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    let tickers: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
    let n = tickers.len();
    let mut weights = ndarray::Array2::zeros((n, n));
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(bad(path, format!("row {i}: wrong field count")));
        }
        for j in 0..n {
            weights[[i, j]] = parse_field(path, fields[j + 1])?
                .ok_or_else(|| bad(path, "missing weight"))?;
        }
    }
    Ok((tickers, weights))
}

pub fn render_strengths(tickers: &[String], strengths: &[f64]) -> String {
    let mut out = String::from("ticker,strength\n");
    for (t, s) in tickers.iter().zip(strengths) {
        let _ = writeln!(out, "{t},{s}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("test.csv")
    }

    #[test]
    fn metric_table_round_trips_bit_exact() {
        let metrics = vec![
            MetricSeries::new("kld_3", vec![None, Some(0.1 + 0.2), Some(1e-17)]),
            MetricSeries::new("rs_3", vec![Some(f64::MIN_POSITIVE), None, Some(2.5)]),
        ];
        let text = render_metrics(&metrics);
        let back = parse_metrics(&p(), &text).unwrap();
        assert_eq!(metrics, back);
    }

    #[test]
    fn changes_and_closes_round_trip() {
        let changes = ChangeSeries {
            lag: 1,
            values: vec![1.5, -2.25, 0.0],
            absolute: vec![1.5, 2.25, 0.0],
            squared: vec![2.25, 5.0625, 0.0],
        };
        let text = render_changes(&changes);
        let back = parse_changes(&p(), &text, 1).unwrap();
        assert_eq!(changes.values, back.values);
        assert_eq!(changes.absolute, back.absolute);
        assert_eq!(changes.squared, back.squared);

        let closes = vec![2100.0, 2098.5, 2101.25];
        let back = parse_closes(&p(), &render_closes(&closes)).unwrap();
        assert_eq!(closes, back);
    }

    #[test]
    fn score_table_round_trips_including_unavailable_cells() {
        let rows = vec![ScoreRow {
            metric: "kld_3".into(),
            samples: 86,
            act_poly2: Some(Score {
                r: 0.5,
                r_squared: 0.25,
                p_value: 0.001,
            }),
            act_poly3: None,
            sqr_linear: Some(Score {
                r: 0.1,
                r_squared: 0.010000000000000002,
                p_value: 0.4,
            }),
            abs_linear: None,
        }];
        let text = render_score_table(&rows);
        let back = parse_score_table(&p(), &text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].samples, 86);
        assert!(back[0].act_poly3.is_none());
        assert_eq!(back[0].act_poly2.unwrap().r_squared, 0.25);
        assert_eq!(
            back[0].sqr_linear.unwrap().r_squared,
            0.010000000000000002
        );
        assert_eq!(score_entries(&rows).len(), 2);
    }

    #[test]
    fn combination_and_comparison_round_trip() {
        let rows = vec![CombinationRow {
            metric_a: "kld_9".into(),
            metric_b: "rs_13".into(),
            kind: "linear".into(),
            a: 0.834,
            score_r: 0.854,
            score_r2: 0.73012,
            samples: 75,
        }];
        let back = parse_combinations(&p(), &render_combinations(&rows)).unwrap();
        assert_eq!(rows, back);

        let comparison = vec![
            ComparisonRow {
                model: "arima(1.1.1)".into(),
                mse: 25.19,
            },
            ComparisonRow {
                model: "arima(1.1.0)+rs_3".into(),
                mse: 20.27,
            },
        ];
        let back = parse_comparison(&p(), &render_comparison(&comparison)).unwrap();
        assert_eq!(comparison, back);
    }

    #[test]
    fn predictions_round_trip_with_gaps() {
        let models = vec!["arima(1.1.1)".to_string(), "arima(1.1.0)+rs_3".to_string()];
        let actuals = vec![2100.0, 2101.0, 2099.0];
        let predictions = vec![
            vec![None, Some(2100.0), Some(2101.0)],
            vec![None, None, Some(2100.5)],
        ];
        let text = render_predictions(&models, &actuals, &predictions);
        let (m, a, preds) = parse_predictions(&p(), &text).unwrap();
        assert_eq!(m, models);
        assert_eq!(a, actuals);
        assert_eq!(preds, predictions);
    }

    #[test]
    fn mi_matrix_dump_round_trips() {
        let tickers = vec!["AAA".to_string(), "BBB".to_string()];
        let weights =
            ndarray::Array2::from_shape_vec((2, 2), vec![0.0, 0.25, 0.25, 0.0]).unwrap();
        let text = render_mi_matrix(&tickers, &weights);
        let (t, w) = parse_mi_matrix(&p(), &text).unwrap();
        assert_eq!(t, tickers);
        assert_eq!(w, weights);
    }
}
