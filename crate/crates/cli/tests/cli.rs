//! Integration tests for the pipeline driver: subcommand behavior, exit
//! codes, output round-trips and run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

use minet_cli::formats;
use minet_cli::run::{run_metrics, run_report};
use minet_cli::{Overrides, RunConfig};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minet"))
}

/// 6 tickers x 24 windows with two injected regimes; small enough for
/// fast tests, large enough for every default metric to be defined.
fn small_fixture_flags(data: &Path) -> Vec<String> {
    vec![
        "--data".into(),
        data.display().to_string(),
        "--tickers".into(),
        "6".into(),
        "--minutes".into(),
        "1440".into(),
        "--events".into(),
        "2".into(),
        "--first-event-window".into(),
        "14".into(),
        "--event-spacing".into(),
        "6".into(),
    ]
}

fn small_config(data: &Path, output: &Path) -> RunConfig {
    let overrides = Overrides {
        data: Some(data.to_path_buf()),
        output: Some(output.to_path_buf()),
        tickers: Some(6),
        minutes: Some(1440),
        events: Some(2),
        first_event_window: Some(14),
        event_spacing: Some(6),
        ..Overrides::default()
    };
    RunConfig::resolve(None, &overrides).unwrap()
}

#[test]
fn report_writes_every_artifact_and_all_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fixture");
    let output = dir.path().join("out");
    let config = small_config(&data, &output);
    minet_cli::run::run_synth(&config).unwrap();
    run_report(&config).unwrap();

    let metrics_path = output.join(formats::METRICS_FILE);
    let metrics =
        formats::parse_metrics(&metrics_path, &formats::read_text(&metrics_path).unwrap()).unwrap();
    assert_eq!(metrics.len(), 21);
    assert_eq!(metrics[0].len(), 24);

    let changes_path = output.join(formats::CHANGES_FILE);
    let changes =
        formats::parse_changes(&changes_path, &formats::read_text(&changes_path).unwrap(), 1)
            .unwrap();
    assert_eq!(changes.len(), 23);

    let closes_path = output.join(formats::CLOSES_FILE);
    let closes =
        formats::parse_closes(&closes_path, &formats::read_text(&closes_path).unwrap()).unwrap();
    assert_eq!(closes.len(), 24);

    let scores_path = output.join(formats::SCORES_CSV);
    let scores =
        formats::parse_score_table(&scores_path, &formats::read_text(&scores_path).unwrap())
            .unwrap();
    assert_eq!(scores.len(), 21);
    let json: serde_json::Value =
        serde_json::from_str(&formats::read_text(&output.join(formats::SCORES_JSON)).unwrap())
            .unwrap();
    assert!(json.as_array().map(|a| !a.is_empty()).unwrap_or(false));

    let combos_path = output.join(formats::COMBINATIONS_FILE);
    let combos =
        formats::parse_combinations(&combos_path, &formats::read_text(&combos_path).unwrap())
            .unwrap();
    assert_eq!(combos.len(), 3);
    for row in &combos {
        assert!((0.0..=1.0).contains(&row.a));
    }

    let cmp_path = output.join(formats::ARIMA_COMPARISON_FILE);
    let comparison =
        formats::parse_comparison(&cmp_path, &formats::read_text(&cmp_path).unwrap()).unwrap();
    assert!(comparison.len() >= 2, "baseline plus exogenous models");
    assert!(comparison.iter().all(|row| row.mse.is_finite()));

    let pred_path = output.join(formats::ARIMA_PREDICTIONS_FILE);
    let (models, actuals, predictions) =
        formats::parse_predictions(&pred_path, &formats::read_text(&pred_path).unwrap()).unwrap();
    assert_eq!(models.len(), comparison.len());
    assert_eq!(actuals, closes);
    assert_eq!(predictions.len(), models.len());

    let manifest: serde_json::Value =
        serde_json::from_str(&formats::read_text(&output.join(formats::MANIFEST_JSON)).unwrap())
            .unwrap();
    assert_eq!(manifest["panel"]["windows"], 24);
    assert_eq!(manifest["panel"]["tickers"], 6);
    assert!(manifest["inputs"]["digest"].as_str().unwrap().len() == 64);
}

fn walk_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    files
}

#[test]
fn two_report_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fixture");
    minet_cli::run::run_synth(&small_config(&data, &dir.path().join("unused"))).unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let mut config_a = small_config(&data, &out_a);
    config_a.dump_mi_matrices = true;
    config_a.dump_strengths = true;
    let mut config_b = small_config(&data, &out_b);
    config_b.dump_mi_matrices = true;
    config_b.dump_strengths = true;
    run_report(&config_a).unwrap();
    run_report(&config_b).unwrap();

    let files_a = walk_files(&out_a);
    let files_b = walk_files(&out_b);
    let names = |files: &[PathBuf], root: &Path| -> Vec<PathBuf> {
        files
            .iter()
            .map(|p| p.strip_prefix(root).unwrap().to_path_buf())
            .collect()
    };
    assert_eq!(names(&files_a, &out_a), names(&files_b, &out_b));
    assert!(files_a.len() > 10);
    for (a, b) in files_a.iter().zip(&files_b) {
        let left = std::fs::read(a).unwrap();
        let right = std::fs::read(b).unwrap();
        assert_eq!(left, right, "{} differs", a.display());
    }
}

#[test]
fn golden_metric_table_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fixture");
    let output = dir.path().join("out");
    let config = small_config(&data, &output);
    minet_cli::run::run_synth(&config).unwrap();
    run_metrics(&config).unwrap();

    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in [formats::METRICS_FILE, formats::CHANGES_FILE] {
        let produced = std::fs::read_to_string(output.join(name)).unwrap();
        let golden = std::fs::read_to_string(golden_dir.join(name))
            .unwrap_or_else(|_| panic!("golden file {name} missing"));
        assert_eq!(produced, golden, "{name} deviates from the golden copy");
    }
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let status = binary().arg("--definitely-not-a-flag").status().unwrap();
    assert_eq!(status.code(), Some(1));
    let status = binary().arg("--help").status().unwrap();
    assert_eq!(status.code(), Some(0));
    // No data path given anywhere.
    let status = binary().arg("metrics").status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn missing_and_empty_data_are_data_errors_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("out");
    let status = binary()
        .args([
            "metrics",
            "--data",
            dir.path().join("nope").to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!output.exists(), "no partial outputs on load failure");

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let status = binary()
        .args([
            "metrics",
            "--data",
            empty.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!output.exists(), "no partial outputs on empty input");
}

#[test]
fn unknown_config_key_and_unknown_metric_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(&config_path, "data = \"x\"\noutput = \"y\"\nnot_a_key = 1\n").unwrap();
    let output = binary()
        .args(["metrics", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("not_a_key"));

    // A combine pair referencing a nonexistent metric lists the valid ones.
    let data = dir.path().join("fixture");
    let out = dir.path().join("out");
    let config = small_config(&data, &out);
    minet_cli::run::run_synth(&config).unwrap();
    std::fs::write(
        &config_path,
        format!(
            "data = \"{}\"\noutput = \"{}\"\n[[combine]]\na = \"kld_3\"\nb = \"wobble\"\nkind = \"linear\"\n",
            data.display(),
            out.display()
        ),
    )
    .unwrap();
    let output = binary()
        .args(["combine", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("wobble") && stderr.contains("kld_3"), "{stderr}");
}

#[test]
fn synth_subcommand_builds_a_loadable_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fixture");
    let mut args = vec!["synth".to_string()];
    args.extend(small_fixture_flags(&data));
    args.extend(["--output".into(), dir.path().join("out").display().to_string()]);
    let status = binary().args(&args).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(data.join("manifest.toml").exists());
    assert!(data.join("T001.csv").exists());
    assert!(data.join("INDEX.csv").exists());
    assert!(data.join("regimes.txt").exists());
}
