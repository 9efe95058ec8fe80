//! Minute-bar ingestion: aligned price panels, LOCF imputation, hourly
//! windows and the index-change target series.
//!
//! Input is either a directory of per-ticker delimited files (header
//! `timestamp,close`, one file per symbol, plus a manifest naming the index
//! series) or a single wide file (`timestamp,TICK1,TICK2,...`). Timestamps
//! may be epoch seconds or ISO-8601; the format is detected per file and
//! must stay consistent within it.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Name of the per-directory manifest that designates the index series.
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Aligned minute-close panel: one row per timestamp, one column per ticker,
/// plus the market index as a separate series on the same timestamps.
///
/// Missing observations are stored as NaN until [`impute_locf`] runs.
#[derive(Debug, Clone)]
pub struct PricePanel {
    timestamps: Vec<i64>,
    tickers: Vec<String>,
    prices: Array2<f64>,
    index: Vec<f64>,
    index_name: String,
}

impl PricePanel {
    /// Build a panel from raw parts, enforcing shape and timestamp order.
    pub fn new(
        timestamps: Vec<i64>,
        tickers: Vec<String>,
        prices: Array2<f64>,
        index: Vec<f64>,
        index_name: String,
    ) -> Result<Self> {
        if prices.nrows() != timestamps.len() || prices.ncols() != tickers.len() {
            return Err(Error::InvalidArgument(format!(
                "price matrix is {}x{} but panel has {} timestamps and {} tickers",
                prices.nrows(),
                prices.ncols(),
                timestamps.len(),
                tickers.len()
            )));
        }
        if index.len() != timestamps.len() {
            return Err(Error::InvalidArgument(
                "index series length does not match timestamps".into(),
            ));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            timestamps,
            tickers,
            prices,
            index,
            index_name,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &Array2<f64> {
        &self.prices
    }

    pub fn index(&self) -> &[f64] {
        &self.index
    }

    pub fn index_name(&self) -> &str {
        &self.index_name
    }

    /// Number of missing (NaN) cells, ticker columns only.
    pub fn missing_cells(&self) -> usize {
        self.prices.iter().filter(|v| v.is_nan()).count()
    }

    fn has_missing(&self) -> bool {
        self.prices.iter().any(|v| v.is_nan()) || self.index.iter().any(|v| v.is_nan())
    }
}

/// A panel loaded from disk plus anything worth reporting about the load.
#[derive(Debug)]
pub struct LoadReport {
    pub panel: PricePanel,
    /// Tickers rejected because their files contained no usable rows.
    pub skipped_tickers: Vec<String>,
}

/// One non-overlapping 60-minute (by default) slice of the panel.
#[derive(Debug, Clone)]
pub struct HourWindow {
    /// Ordinal starting at 1.
    pub window_index: usize,
    /// window_length x n_tickers sub-matrix of close prices.
    pub prices: Array2<f64>,
    /// Index value at the first minute of the window.
    pub index_open: f64,
    /// Index value at the last minute of the window.
    pub index_close: f64,
}

impl HourWindow {
    /// Per-ticker log returns inside the window (one row fewer than prices).
    /// Only used by the experimental returns mode.
    pub fn log_returns(&self) -> Array2<f64> {
        let (rows, cols) = (self.prices.nrows(), self.prices.ncols());
        let mut out = Array2::zeros((rows.saturating_sub(1), cols));
        for c in 0..cols {
            for r in 1..rows {
                out[[r - 1, c]] = (self.prices[[r, c]] / self.prices[[r - 1, c]]).ln();
            }
        }
        out
    }
}

/// Result of slicing a panel into windows.
#[derive(Debug)]
pub struct SplitReport {
    pub windows: Vec<HourWindow>,
    /// Trailing rows that did not fill a whole window.
    pub dropped_rows: usize,
}

/// Per-window index changes, aligned so the predictor at window t pairs
/// with `values[t] = index_close(t + lag) - index_close(t)`.
#[derive(Debug, Clone)]
pub struct ChangeSeries {
    pub lag: usize,
    pub values: Vec<f64>,
    pub absolute: Vec<f64>,
    pub squared: Vec<f64>,
}

impl ChangeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum TimestampKind {
    Epoch,
    Iso,
}

fn parse_timestamp(raw: &str, kind: Option<TimestampKind>) -> Option<(i64, TimestampKind)> {
    let raw = raw.trim();
    if kind != Some(TimestampKind::Iso) {
        if let Ok(secs) = raw.parse::<i64>() {
            return Some((secs, TimestampKind::Epoch));
        }
        if kind == Some(TimestampKind::Epoch) {
            return None;
        }
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some((dt.timestamp(), TimestampKind::Iso));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(raw, fmt) {
            return Some((naive.and_utc().timestamp(), TimestampKind::Iso));
        }
    }
    None
}

fn parse_close(raw: &str) -> std::result::Result<f64, String> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("close {raw:?} is not a number"))?;
    if !value.is_finite() {
        return Err(format!("close {raw:?} is not finite"));
    }
    if value <= 0.0 {
        return Err(format!("close {value} must be positive"));
    }
    Ok(value)
}

/// One parsed (timestamp, close) series.
struct RawSeries {
    name: String,
    rows: Vec<(i64, f64)>,
}

fn read_ticker_file(path: &Path) -> Result<RawSeries> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?
        .clone();
    let ts_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("timestamp"));
    let close_col = headers.iter().position(|h| h.eq_ignore_ascii_case("close"));
    let (ts_col, close_col) = match (ts_col, close_col) {
        (Some(t), Some(c)) => (t, c),
        _ => {
            return Err(Error::BadRow {
                file: path.to_path_buf(),
                line: 1,
                reason: "header must contain `timestamp` and `close`".into(),
            })
        }
    };

    let mut kind: Option<TimestampKind> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::BadRow {
            file: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::BadRow {
            file: path.to_path_buf(),
            line,
            reason,
        };
        let raw_ts = record
            .get(ts_col)
            .ok_or_else(|| bad("missing timestamp field".into()))?;
        let (ts, seen_kind) = parse_timestamp(raw_ts, kind)
            .ok_or_else(|| bad(format!("timestamp {raw_ts:?} not epoch seconds or ISO-8601")))?;
        kind.get_or_insert(seen_kind);
        let raw_close = record
            .get(close_col)
            .ok_or_else(|| bad("missing close field".into()))?;
        let close = parse_close(raw_close).map_err(bad)?;
        rows.push((ts, close));
    }

    // Files may arrive unordered; sort and reject duplicate stamps.
    rows.sort_by_key(|(ts, _)| *ts);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateTimestamp {
            file: path.to_path_buf(),
            line: 0,
            timestamp: w[0].0.to_string(),
        });
    }
    Ok(RawSeries { name, rows })
}

fn read_manifest_index(dir: &Path) -> Result<String> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("index") {
            let rest = rest.trim_start();
            if let Some(value) = rest.strip_prefix('=') {
                return Ok(value.trim().trim_matches('"').to_string());
            }
        }
    }
    Err(Error::MissingIndex {
        name: "index".into(),
        path,
    })
}

/// Load an aligned panel from a directory of per-ticker files or a single
/// wide file.
///
/// `index_override` takes precedence over the directory manifest; for wide
/// files it is required. Tickers with zero usable rows are skipped and
/// listed in the report. Cells stay NaN where a ticker has no record at a
/// timestamp in the union.
pub fn load_panel(source: &Path, index_override: Option<&str>) -> Result<LoadReport> {
    if source.is_dir() {
        load_panel_dir(source, index_override)
    } else {
        load_panel_wide(source, index_override)
    }
}

fn load_panel_dir(dir: &Path, index_override: Option<&str>) -> Result<LoadReport> {
    let index_name = match index_override {
        Some(name) => name.to_string(),
        None => read_manifest_index(dir)?,
    };

    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    // read_dir order is platform-dependent; sort for a stable column order.
    paths.sort();

    let mut index_series: Option<RawSeries> = None;
    let mut series = Vec::new();
    let mut skipped = Vec::new();
    for path in &paths {
        let raw = read_ticker_file(path)?;
        if raw.name == index_name {
            index_series = Some(raw);
            continue;
        }
        if raw.rows.is_empty() {
            skipped.push(raw.name);
        } else {
            series.push(raw);
        }
    }

    let index_series = index_series.ok_or_else(|| Error::MissingIndex {
        name: index_name.clone(),
        path: dir.to_path_buf(),
    })?;
    if index_series.rows.is_empty() {
        return Err(Error::AllMissingColumn {
            ticker: index_name.clone(),
        });
    }
    if series.len() < 2 {
        return Err(Error::TooFewTickers {
            found: series.len(),
        });
    }

    let mut stamp_set: BTreeSet<i64> = BTreeSet::new();
    for s in series.iter().chain(std::iter::once(&index_series)) {
        stamp_set.extend(s.rows.iter().map(|(ts, _)| *ts));
    }
    let timestamps: Vec<i64> = stamp_set.into_iter().collect();
    let row_of = |ts: i64| timestamps.binary_search(&ts).expect("stamp in union");

    let tickers: Vec<String> = series.iter().map(|s| s.name.clone()).collect();
    let mut prices = Array2::from_elem((timestamps.len(), tickers.len()), f64::NAN);
    for (col, s) in series.iter().enumerate() {
        for &(ts, close) in &s.rows {
            prices[[row_of(ts), col]] = close;
        }
    }
    let mut index = vec![f64::NAN; timestamps.len()];
    for &(ts, close) in &index_series.rows {
        index[row_of(ts)] = close;
    }

    let panel = PricePanel::new(timestamps, tickers, prices, index, index_name)?;
    Ok(LoadReport {
        panel,
        skipped_tickers: skipped,
    })
}

fn load_panel_wide(path: &Path, index_override: Option<&str>) -> Result<LoadReport> {
    let index_name = index_override
        .ok_or_else(|| Error::InvalidArgument("wide files need an explicit index name".into()))?
        .to_string();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?
        .clone();
    let mut columns: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    if columns.is_empty() || !columns[0].eq_ignore_ascii_case("timestamp") {
        return Err(Error::BadRow {
            file: path.to_path_buf(),
            line: 1,
            reason: "first header column must be `timestamp`".into(),
        });
    }
    columns.remove(0);
    let index_col = columns
        .iter()
        .position(|c| *c == index_name)
        .ok_or_else(|| Error::MissingIndex {
            name: index_name.clone(),
            path: path.to_path_buf(),
        })?;

    let mut kind: Option<TimestampKind> = None;
    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::BadRow {
            file: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::BadRow {
            file: path.to_path_buf(),
            line,
            reason,
        };
        let raw_ts = record
            .get(0)
            .ok_or_else(|| bad("missing timestamp field".into()))?;
        let (ts, seen_kind) = parse_timestamp(raw_ts, kind)
            .ok_or_else(|| bad(format!("timestamp {raw_ts:?} not epoch seconds or ISO-8601")))?;
        kind.get_or_insert(seen_kind);
        let mut values = Vec::with_capacity(columns.len());
        for (i, _) in columns.iter().enumerate() {
            let raw = record.get(i + 1).unwrap_or("");
            if raw.is_empty() {
                values.push(f64::NAN);
            } else {
                values.push(parse_close(raw).map_err(bad)?);
            }
        }
        rows.push((ts, values));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateTimestamp {
            file: path.to_path_buf(),
            line: 0,
            timestamp: w[0].0.to_string(),
        });
    }

    let timestamps: Vec<i64> = rows.iter().map(|(ts, _)| *ts).collect();
    let mut skipped = Vec::new();
    let mut keep: Vec<usize> = Vec::new();
    for (i, name) in columns.iter().enumerate() {
        if i == index_col {
            continue;
        }
        if rows.iter().all(|(_, v)| v[i].is_nan()) {
            skipped.push(name.clone());
        } else {
            keep.push(i);
        }
    }
    if keep.len() < 2 {
        return Err(Error::TooFewTickers { found: keep.len() });
    }
    if rows.iter().all(|(_, v)| v[index_col].is_nan()) {
        return Err(Error::AllMissingColumn { ticker: index_name });
    }

    let tickers: Vec<String> = keep.iter().map(|&i| columns[i].clone()).collect();
    let mut prices = Array2::from_elem((timestamps.len(), keep.len()), f64::NAN);
    let mut index = vec![f64::NAN; timestamps.len()];
    for (r, (_, values)) in rows.iter().enumerate() {
        for (c, &i) in keep.iter().enumerate() {
            prices[[r, c]] = values[i];
        }
        index[r] = values[index_col];
    }
    let panel = PricePanel::new(timestamps, tickers, prices, index, index_name)?;
    Ok(LoadReport {
        panel,
        skipped_tickers: skipped,
    })
}

fn locf_fill(column: &mut [f64]) -> bool {
    let first_observed = match column.iter().position(|v| !v.is_nan()) {
        Some(i) => i,
        None => return false,
    };
    let first_value = column[first_observed];
    for v in column.iter_mut().take(first_observed) {
        *v = first_value;
    }
    let mut last = first_value;
    for v in column.iter_mut() {
        if v.is_nan() {
            *v = last;
        } else {
            last = *v;
        }
    }
    true
}

/// Replace every missing cell with the most recent prior observation in the
/// same column; leading gaps are back-filled from the first observed value.
///
/// Idempotent: a panel without missing cells passes through unchanged.
pub fn impute_locf(panel: &PricePanel) -> Result<PricePanel> {
    let mut out = panel.clone();
    for (c, ticker) in panel.tickers.iter().enumerate() {
        let mut column: Vec<f64> = out.prices.column(c).to_vec();
        if !locf_fill(&mut column) {
            return Err(Error::AllMissingColumn {
                ticker: ticker.clone(),
            });
        }
        for (r, v) in column.into_iter().enumerate() {
            out.prices[[r, c]] = v;
        }
    }
    if !locf_fill(&mut out.index) {
        return Err(Error::AllMissingColumn {
            ticker: out.index_name.clone(),
        });
    }

    // The imputed panel must be strictly positive everywhere.
    for (c, ticker) in out.tickers.iter().enumerate() {
        for r in 0..out.n_rows() {
            let v = out.prices[[r, c]];
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonPositivePrice {
                    ticker: ticker.clone(),
                    row: r,
                });
            }
        }
    }
    if let Some(r) = out.index.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::NonPositivePrice {
            ticker: out.index_name.clone(),
            row: r,
        });
    }
    Ok(out)
}

/// Slice the panel into consecutive non-overlapping windows of
/// `window_length` rows, dropping the trailing remainder.
pub fn split_windows(panel: &PricePanel, window_length: usize) -> Result<SplitReport> {
    if window_length < 2 {
        return Err(Error::InvalidArgument(
            "window length must be at least 2".into(),
        ));
    }
    if panel.has_missing() {
        return Err(Error::InvalidArgument(
            "panel has missing cells; run imputation first".into(),
        ));
    }
    let rows = panel.n_rows();
    if rows < window_length {
        return Err(Error::TooFewRows {
            rows,
            window: window_length,
        });
    }
    let count = rows / window_length;
    let mut windows = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * window_length;
        let end = start + window_length;
        windows.push(HourWindow {
            window_index: w + 1,
            prices: panel.prices.slice(ndarray::s![start..end, ..]).to_owned(),
            index_open: panel.index[start],
            index_close: panel.index[end - 1],
        });
    }
    Ok(SplitReport {
        windows,
        dropped_rows: rows - count * window_length,
    })
}

/// Per-window index change `lag` steps ahead, with exact absolute and
/// squared columns.
pub fn index_changes(windows: &[HourWindow], lag: usize) -> Result<ChangeSeries> {
    if lag == 0 || lag >= windows.len() {
        return Err(Error::BadLag {
            lag,
            windows: windows.len(),
        });
    }
    let values: Vec<f64> = (0..windows.len() - lag)
        .map(|t| windows[t + lag].index_close - windows[t].index_close)
        .collect();
    let absolute: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let squared: Vec<f64> = values.iter().map(|v| v * v).collect();
    Ok(ChangeSeries {
        lag,
        values,
        absolute,
        squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, body: &str) {
        let mut f = std::fs::File::create(dir.join(name)).unwrap();
        f.write_all(body.as_bytes()).unwrap();
    }

    fn panel_from(prices: Array2<f64>, index: Vec<f64>) -> PricePanel {
        let rows = prices.nrows();
        let tickers = (0..prices.ncols()).map(|i| format!("T{i}")).collect();
        PricePanel::new(
            (0..rows as i64).map(|i| i * 60).collect(),
            tickers,
            prices,
            index,
            "IDX".into(),
        )
        .unwrap()
    }

    #[test]
    fn loads_fully_aligned_directory() {
        let dir = tempfile::tempdir().unwrap();
        let stamps: Vec<String> = (0..120).map(|i| (1_474_550_400 + i * 60).to_string()).collect();
        for name in ["AAA", "BBB", "CCC"] {
            let mut body = String::from("timestamp,close\n");
            for (i, ts) in stamps.iter().enumerate() {
                body.push_str(&format!("{ts},{}\n", 100.0 + i as f64));
            }
            write_file(dir.path(), &format!("{name}.csv"), &body);
        }
        let mut body = String::from("timestamp,close\n");
        for ts in &stamps {
            body.push_str(&format!("{ts},2100.5\n"));
        }
        write_file(dir.path(), "IDX.csv", &body);
        write_file(dir.path(), MANIFEST_FILE, "index = \"IDX\"\n");

        let report = load_panel(dir.path(), None).unwrap();
        assert_eq!(report.panel.n_rows(), 120);
        assert_eq!(report.panel.n_tickers(), 3);
        assert_eq!(report.panel.missing_cells(), 0);
        assert!(report.skipped_tickers.is_empty());
        assert_eq!(report.panel.index_name(), "IDX");
    }

    #[test]
    fn missing_rows_become_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let full: Vec<i64> = (0..20).map(|i| 1000 + i * 60).collect();
        let mut a = String::from("timestamp,close\n");
        let mut b = String::from("timestamp,close\n");
        let mut idx = String::from("timestamp,close\n");
        for (i, ts) in full.iter().enumerate() {
            a.push_str(&format!("{ts},{}\n", 10.0 + i as f64));
            idx.push_str(&format!("{ts},2000\n"));
            // B has no record at minutes 10..13.
            if !(10..13).contains(&i) {
                b.push_str(&format!("{ts},{}\n", 50.0 + i as f64));
            }
        }
        write_file(dir.path(), "A.csv", &a);
        write_file(dir.path(), "B.csv", &b);
        write_file(dir.path(), "IDX.csv", &idx);
        write_file(dir.path(), MANIFEST_FILE, "index = \"IDX\"\n");

        let report = load_panel(dir.path(), None).unwrap();
        assert_eq!(report.panel.missing_cells(), 3);
        let col_b = report
            .panel
            .tickers()
            .iter()
            .position(|t| t == "B")
            .unwrap();
        for r in 10..13 {
            assert!(report.panel.prices()[[r, col_b]].is_nan());
        }
    }

    #[test]
    fn iso_timestamps_parse_and_zero_record_ticker_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = String::from("timestamp,close\n");
        for i in 0..4 {
            a.push_str(&format!("2016-09-22T09:{:02}:00Z,10.5\n", 30 + i));
        }
        write_file(dir.path(), "A.csv", &a);
        write_file(dir.path(), "B.csv", &a.replace("10.5", "20.5"));
        write_file(dir.path(), "EMPTY.csv", "timestamp,close\n");
        write_file(dir.path(), "IDX.csv", &a.replace("10.5", "2100"));
        write_file(dir.path(), MANIFEST_FILE, "index = \"IDX\"\n");
        let report = load_panel(dir.path(), None).unwrap();
        assert_eq!(report.skipped_tickers, vec!["EMPTY".to_string()]);
        assert_eq!(report.panel.n_tickers(), 2);
        assert_eq!(report.panel.timestamps()[0], 1_474_536_600);
    }

    #[test]
    fn bad_row_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "A.csv", "timestamp,close\n100,1.0\n160,oops\n");
        write_file(dir.path(), "B.csv", "timestamp,close\n100,1.0\n");
        write_file(dir.path(), "IDX.csv", "timestamp,close\n100,1.0\n");
        write_file(dir.path(), MANIFEST_FILE, "index = \"IDX\"\n");
        let err = load_panel(dir.path(), None).unwrap_err();
        match err {
            Error::BadRow { file, line, .. } => {
                assert!(file.ends_with("A.csv"));
                assert_eq!(line, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn too_few_tickers_and_missing_index_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "A.csv", "timestamp,close\n100,1.0\n");
        write_file(dir.path(), "IDX.csv", "timestamp,close\n100,1.0\n");
        write_file(dir.path(), MANIFEST_FILE, "index = \"IDX\"\n");
        assert!(matches!(
            load_panel(dir.path(), None).unwrap_err(),
            Error::TooFewTickers { found: 1 }
        ));
        assert!(matches!(
            load_panel(dir.path(), Some("NOPE")).unwrap_err(),
            Error::MissingIndex { .. }
        ));
    }

    #[test]
    fn locf_fills_interior_gaps() {
        let prices = Array2::from_shape_vec(
            (4, 1),
            vec![10.0, f64::NAN, f64::NAN, 11.0],
        )
        .unwrap();
        let panel = panel_from(prices, vec![1.0; 4]);
        let filled = impute_locf(&panel).unwrap();
        let col: Vec<f64> = filled.prices().column(0).to_vec();
        assert_eq!(col, vec![10.0, 10.0, 10.0, 11.0]);
    }

    #[test]
    fn locf_backfills_leading_gaps() {
        let prices =
            Array2::from_shape_vec((4, 1), vec![f64::NAN, f64::NAN, 5.0, f64::NAN]).unwrap();
        let panel = panel_from(prices, vec![1.0; 4]);
        let filled = impute_locf(&panel).unwrap();
        let col: Vec<f64> = filled.prices().column(0).to_vec();
        assert_eq!(col, vec![5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn locf_is_identity_without_gaps_and_idempotent() {
        let prices = Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let panel = panel_from(prices.clone(), vec![9.0, 9.5, 10.0]);
        let once = impute_locf(&panel).unwrap();
        assert_eq!(once.prices(), &prices);
        let twice = impute_locf(&once).unwrap();
        assert_eq!(twice.prices(), once.prices());
        assert_eq!(twice.index(), once.index());
    }

    #[test]
    fn locf_rejects_all_missing_column() {
        let prices = Array2::from_elem((3, 1), f64::NAN);
        let panel = panel_from(prices, vec![1.0; 3]);
        assert!(matches!(
            impute_locf(&panel).unwrap_err(),
            Error::AllMissingColumn { ticker } if ticker == "T0"
        ));
    }

    #[test]
    fn split_counts_windows_and_dropped_rows() {
        let make = |rows: usize| {
            let prices = Array2::from_shape_fn((rows, 2), |(r, c)| 1.0 + (r + c) as f64);
            panel_from(prices, (0..rows).map(|r| 100.0 + r as f64).collect())
        };
        assert_eq!(split_windows(&make(5340), 60).unwrap().windows.len(), 89);
        let even = split_windows(&make(120), 60).unwrap();
        assert_eq!(even.windows.len(), 2);
        assert_eq!(even.dropped_rows, 0);
        let ragged = split_windows(&make(130), 60).unwrap();
        assert_eq!(ragged.windows.len(), 2);
        assert_eq!(ragged.dropped_rows, 10);
        assert!(matches!(
            split_windows(&make(59), 60).unwrap_err(),
            Error::TooFewRows { rows: 59, window: 60 }
        ));
    }

    #[test]
    fn split_concatenation_reproduces_prefix() {
        let rows = 130;
        let prices = Array2::from_shape_fn((rows, 3), |(r, c)| (r * 7 + c + 1) as f64);
        let panel = panel_from(prices.clone(), (0..rows).map(|r| 1.0 + r as f64).collect());
        let report = split_windows(&panel, 60).unwrap();
        let mut r = 0;
        for w in &report.windows {
            for wr in 0..w.prices.nrows() {
                for c in 0..3 {
                    assert_eq!(w.prices[[wr, c]], prices[[r, c]]);
                }
                r += 1;
            }
        }
        assert_eq!(r, 120);
        assert_eq!(report.windows[0].index_open, 1.0);
        assert_eq!(report.windows[0].index_close, 60.0);
    }

    #[test]
    fn index_changes_match_hand_cases() {
        let window = |close: f64| HourWindow {
            window_index: 1,
            prices: Array2::zeros((2, 2)),
            index_open: close,
            index_close: close,
        };
        let windows: Vec<HourWindow> = [100.0, 103.0, 101.0].iter().map(|&c| window(c)).collect();
        let changes = index_changes(&windows, 1).unwrap();
        assert_eq!(changes.values, vec![3.0, -2.0]);
        assert_eq!(changes.absolute, vec![3.0, 2.0]);
        assert_eq!(changes.squared, vec![9.0, 4.0]);

        let flat: Vec<HourWindow> = std::iter::repeat(100.0).take(4).map(window).collect();
        assert!(index_changes(&flat, 1).unwrap().values.iter().all(|v| *v == 0.0));

        let four: Vec<HourWindow> = [100.0, 103.0, 101.0, 105.0]
            .iter()
            .map(|&c| window(c))
            .collect();
        assert_eq!(index_changes(&four, 2).unwrap().values, vec![1.0, 2.0]);

        assert!(matches!(
            index_changes(&windows, 3).unwrap_err(),
            Error::BadLag { .. }
        ));
    }

    #[test]
    fn change_series_columns_are_exact() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        runner
            .run(
                &proptest::collection::vec(-1e6f64..1e6, 2..40),
                |closes| {
                    let windows: Vec<HourWindow> = closes
                        .iter()
                        .map(|&c| HourWindow {
                            window_index: 1,
                            prices: Array2::zeros((2, 1)),
                            index_open: c,
                            index_close: c,
                        })
                        .collect();
                    let changes = index_changes(&windows, 1).unwrap();
                    for t in 0..changes.len() {
                        prop_assert!(changes.absolute[t] >= 0.0);
                        prop_assert_eq!(changes.absolute[t], changes.values[t].abs());
                        prop_assert_eq!(changes.squared[t], changes.values[t] * changes.values[t]);
                    }
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn locf_idempotence_on_random_masks() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        let strategy = (
            proptest::collection::vec(0.5f64..100.0, 8..40),
            proptest::collection::vec(proptest::bool::ANY, 8..40),
        );
        runner
            .run(&strategy, |(values, mask)| {
                let rows = values.len().min(mask.len());
                let mut data = Vec::with_capacity(rows);
                let mut any_observed = false;
                for r in 0..rows {
                    if mask[r] {
                        any_observed = true;
                        data.push(values[r]);
                    } else {
                        data.push(f64::NAN);
                    }
                }
                prop_assume!(any_observed);
                let prices = Array2::from_shape_vec((rows, 1), data).unwrap();
                let panel = panel_from(prices, vec![1.0; rows]);
                let once = impute_locf(&panel).unwrap();
                let twice = impute_locf(&once).unwrap();
                prop_assert_eq!(once.prices(), twice.prices());
                prop_assert_eq!(once.missing_cells(), 0);
                Ok(())
            })
            .unwrap();
    }
}
