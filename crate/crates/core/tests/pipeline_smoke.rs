//! End-to-end run of the library pipeline on a small generated fixture:
//! files -> panel -> windows -> networks -> metric table -> scores ->
//! combined predictors -> ARIMA comparison.

use minet::arima::{fit_arima, grid_search_order, one_step_predictions, ArimaOrder, GridBounds};
use minet::panel::{impute_locf, index_changes, load_panel, split_windows};
use minet::pipeline::{analyze_windows, metric_names, metric_table, AnalysisOptions};
use minet::predictors::{grid_search_a, Horizon};
use minet::regress::{score_table, RegressionKind};
use minet::synth::{write_fixture, SynthConfig};

fn fixture_config() -> SynthConfig {
    SynthConfig {
        n_tickers: 16,
        n_minutes: 30 * 60,
        n_events: 2,
        first_event_window: 16,
        event_spacing: 6,
        missing_rate: 0.005,
        ..SynthConfig::default()
    }
}

#[test]
fn full_pipeline_produces_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config();
    let synth = write_fixture(dir.path(), &config).unwrap();
    assert_eq!(synth.n_windows, 30);

    let loaded = load_panel(dir.path(), None).unwrap();
    assert_eq!(loaded.panel.n_tickers(), 16);
    let panel = impute_locf(&loaded.panel).unwrap();
    let split = split_windows(&panel, config.window_length).unwrap();
    assert_eq!(split.windows.len(), 30);
    let changes = index_changes(&split.windows, 1).unwrap();
    assert_eq!(changes.len(), 29);

    let options = AnalysisOptions {
        horizons: vec![3, 6],
        histogram_width: 0.5,
        ..AnalysisOptions::default()
    };
    let analysis = analyze_windows(&split.windows, &options, None).unwrap();
    let metrics = metric_table(&analysis, &options).unwrap();
    assert_eq!(
        metrics.iter().map(|m| m.name.clone()).collect::<Vec<_>>(),
        metric_names(&options.horizons)
    );

    // Weight-matrix invariants surfaced through strengths: all finite,
    // nonnegative, and histograms normalized.
    for m in &analysis.measures {
        assert!(m.strengths.iter().all(|s| s.is_finite() && *s >= 0.0));
        assert!((-0.5..=1.0).contains(&m.modularity_q));
    }
    for h in &analysis.histograms {
        let total: f64 = h.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    // The injected events leave a visible KLD signature.
    let kld3 = &metrics[0];
    let event_windows: Vec<usize> = synth
        .events
        .iter()
        .map(|e| e.onset_window - 1)
        .collect();
    let mut background: Vec<f64> = kld3
        .defined()
        .filter(|(t, _)| !event_windows.contains(t) && !event_windows.contains(&(t.wrapping_sub(1))))
        .map(|(_, v)| v)
        .collect();
    background.sort_by(f64::total_cmp);
    let median = background[background.len() / 2];
    for &w in &event_windows {
        let spike = kld3.values[w].unwrap();
        assert!(
            spike > 2.0 * median,
            "window {w}: kld {spike} vs background median {median}"
        );
    }

    let scores = score_table(&metrics, &changes);
    assert_eq!(scores.len(), metrics.len());
    // Betweenness can be identically zero on small near-complete graphs
    // (every shortest path is the direct edge), which leaves those rows
    // with a constant predictor; everything else must fit.
    for row in &scores {
        assert!(
            row.available() || row.metric.starts_with("btw_"),
            "row {} unavailable",
            row.metric
        );
    }

    let kld6 = metrics.iter().find(|m| m.name == "kld_6").unwrap();
    let skew = metrics.iter().find(|m| m.name == "skewness").unwrap();
    let combined = grid_search_a(kld6, skew, &changes.absolute, RegressionKind::Linear, 0.01)
        .unwrap();
    assert!((0.0..=1.0).contains(&combined.a));
    assert!((0.0..=1.0).contains(&combined.r_squared));

    // ARIMA on the hourly index closes.
    let closes: Vec<f64> = split.windows.iter().map(|w| w.index_close).collect();
    let report = grid_search_order(
        &closes,
        GridBounds {
            p_max: 1,
            d_max: 1,
            q_max: 1,
        },
        None,
    )
    .unwrap();
    let baseline = one_step_predictions(&report.best);
    assert!(baseline.mse.is_finite());

    // Same fixture through a fixed ARIMAX, sliced to the defined exog span.
    let rs3 = rs_series_of(&analysis, 3);
    let first = rs3.iter().position(|v| v.is_some()).unwrap();
    let exog: Vec<f64> = rs3[first..].iter().map(|v| v.unwrap()).collect();
    let sliced: Vec<f64> = closes[first..].to_vec();
    let arimax = fit_arima(&sliced, ArimaOrder::new(1, 1, 0), Some(&exog)).unwrap();
    assert_eq!(arimax.n_effective, sliced.len() - 2);
    assert!(one_step_predictions(&arimax).mse.is_finite());
}

fn rs_series_of(analysis: &minet::pipeline::WindowAnalysis, s: usize) -> Vec<Option<f64>> {
    minet::predictors::rs_series(&analysis.mean_strengths(), Horizon::Steps(s))
        .unwrap()
        .values
}
