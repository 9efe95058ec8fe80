//! Run configuration: a TOML file with CLI-flag overrides on top and
//! defaults underneath. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use minet::arima::{ArimaOrder, GridBounds};
use minet::graph::DistanceTransform;
use minet::mi::{BinRule, MiMode};
use minet::pipeline::AnalysisOptions;
use minet::regress::RegressionKind;
use minet::synth::SynthConfig;

use crate::error::{CliError, CliResult};

/// One configured metric pair to combine, with the regression kind used
/// to optimize the mixing constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombineSpec {
    pub a: String,
    pub b: String,
    pub kind: String,
}

impl CombineSpec {
    pub fn regression_kind(&self) -> CliResult<RegressionKind> {
        RegressionKind::from_str(&self.kind).map_err(CliError::Core)
    }
}

/// ARIMA stage settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArimaSection {
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
    /// Metrics fed one at a time as the exogenous regressor.
    pub exog_metrics: Vec<String>,
    /// Fixed (p, d, q) used for the exogenous fits.
    pub exog_order: [usize; 3],
    /// Windows the exogenous series is shifted forward before fitting.
    pub exog_lag: usize,
}

impl Default for ArimaSection {
    fn default() -> Self {
        Self {
            p_max: 3,
            d_max: 2,
            q_max: 3,
            exog_metrics: vec![
                "kld_3".into(),
                "rs_3".into(),
                "skewness".into(),
                "kurtosis".into(),
                "mean".into(),
                "variance".into(),
                "eig_mean".into(),
                "btw_mean".into(),
                "modularity".into(),
            ],
            exog_order: [1, 1, 0],
            exog_lag: 0,
        }
    }
}

impl ArimaSection {
    pub fn bounds(&self) -> GridBounds {
        GridBounds {
            p_max: self.p_max,
            d_max: self.d_max,
            q_max: self.q_max,
        }
    }

    pub fn exog_arima_order(&self) -> ArimaOrder {
        ArimaOrder::new(self.exog_order[0], self.exog_order[1], self.exog_order[2])
    }
}

/// Synthetic fixture settings; mirrors the generator's parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_tickers: usize,
    pub n_minutes: usize,
    pub seed: u64,
    pub n_events: usize,
    pub first_event_window: usize,
    pub event_spacing: usize,
    pub ticker_vol: f64,
    pub onset_fraction: f64,
    pub down_move_fraction: f64,
    pub comove_drift: f64,
    pub index_move: f64,
    pub index_start: f64,
    pub index_vol: f64,
    pub missing_rate: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let base = SynthConfig::default();
        Self {
            n_tickers: base.n_tickers,
            n_minutes: base.n_minutes,
            seed: base.seed,
            n_events: base.n_events,
            first_event_window: base.first_event_window,
            event_spacing: base.event_spacing,
            ticker_vol: base.ticker_vol,
            onset_fraction: base.onset_fraction,
            down_move_fraction: base.down_move_fraction,
            comove_drift: base.comove_drift,
            index_move: base.index_move,
            index_start: base.index_start,
            index_vol: base.index_vol,
            missing_rate: base.missing_rate,
        }
    }
}

impl SynthSection {
    pub fn to_synth_config(&self, window_length: usize) -> SynthConfig {
        SynthConfig {
            n_tickers: self.n_tickers,
            n_minutes: self.n_minutes,
            window_length,
            seed: self.seed,
            start_epoch: SynthConfig::default().start_epoch,
            n_events: self.n_events,
            first_event_window: self.first_event_window,
            event_spacing: self.event_spacing,
            ticker_vol: self.ticker_vol,
            onset_fraction: self.onset_fraction,
            down_move_fraction: self.down_move_fraction,
            comove_drift: self.comove_drift,
            index_move: self.index_move,
            index_start: self.index_start,
            index_vol: self.index_vol,
            missing_rate: self.missing_rate,
        }
    }
}

/// Analytic parameters: everything that shapes the numbers, no paths.
/// This is the part echoed into the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    pub index: Option<String>,
    pub window_length: usize,
    pub target_lag: usize,
    /// Discretization rule, e.g. "equal-width-count:12". Empty means one
    /// bin per five samples of the window length.
    pub bin_rule: String,
    /// Drop joint cells with equal bin labels, as in the literal reading
    /// of the pairwise information formula.
    pub mi_literal_pairs: bool,
    /// Feed per-window log returns instead of raw prices into the MI step.
    pub use_returns: bool,
    pub histogram_width: f64,
    pub epsilon: f64,
    pub horizons: Vec<usize>,
    pub grid_step: f64,
    /// Z-score both series before combining; off by default.
    pub zscore_combine: bool,
    pub betweenness_transform: String,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    pub modularity_seed: u64,
    pub combine: Vec<CombineSpec>,
    pub arima: ArimaSection,
    pub synth: SynthSection,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            index: None,
            window_length: 60,
            target_lag: 1,
            bin_rule: String::new(),
            mi_literal_pairs: false,
            use_returns: false,
            histogram_width: 10.0,
            epsilon: 1e-10,
            horizons: vec![3, 6, 9, 13],
            grid_step: 0.001,
            zscore_combine: false,
            betweenness_transform: "reciprocal".into(),
            eig_tol: 1e-9,
            eig_max_iter: 1000,
            modularity_seed: 0,
            combine: vec![
                CombineSpec {
                    a: "kld_3".into(),
                    b: "skewness".into(),
                    kind: "poly3".into(),
                },
                CombineSpec {
                    a: "kld_6".into(),
                    b: "skewness".into(),
                    kind: "poly2".into(),
                },
                CombineSpec {
                    a: "kld_9".into(),
                    b: "rs_13".into(),
                    kind: "linear".into(),
                },
            ],
            arima: ArimaSection::default(),
            synth: SynthSection::default(),
        }
    }
}

/// The on-disk config shape: paths plus [`Parameters`] flattened together.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    data: Option<PathBuf>,
    output: Option<PathBuf>,
    /// Worker threads; 0 picks the machine default.
    parallelism: usize,
    dump_mi_matrices: bool,
    dump_strengths: bool,
    #[serde(flatten)]
    parameters: Parameters,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: PathBuf,
    pub output: PathBuf,
    pub parallelism: usize,
    pub dump_mi_matrices: bool,
    pub dump_strengths: bool,
    pub parameters: Parameters,
}

/// Optional command-line overrides, applied over the file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub index: Option<String>,
    pub window_length: Option<usize>,
    pub target_lag: Option<usize>,
    pub bin_rule: Option<String>,
    pub epsilon: Option<f64>,
    pub grid_step: Option<f64>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
    pub tickers: Option<usize>,
    pub minutes: Option<usize>,
    pub events: Option<usize>,
    pub first_event_window: Option<usize>,
    pub event_spacing: Option<usize>,
    pub dump_mi_matrices: bool,
    pub dump_strengths: bool,
}

impl RunConfig {
    /// Resolve precedence: flags over file over defaults.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut base = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        if let Some(data) = &overrides.data {
            base.data = Some(data.clone());
        }
        if let Some(output) = &overrides.output {
            base.output = Some(output.clone());
        }
        if let Some(index) = &overrides.index {
            base.parameters.index = Some(index.clone());
        }
        if let Some(window) = overrides.window_length {
            base.parameters.window_length = window;
        }
        if let Some(lag) = overrides.target_lag {
            base.parameters.target_lag = lag;
        }
        if let Some(rule) = &overrides.bin_rule {
            base.parameters.bin_rule = rule.clone();
        }
        if let Some(epsilon) = overrides.epsilon {
            base.parameters.epsilon = epsilon;
        }
        if let Some(step) = overrides.grid_step {
            base.parameters.grid_step = step;
        }
        if let Some(parallelism) = overrides.parallelism {
            base.parallelism = parallelism;
        }
        if let Some(seed) = overrides.seed {
            base.parameters.synth.seed = seed;
        }
        if let Some(tickers) = overrides.tickers {
            base.parameters.synth.n_tickers = tickers;
        }
        if let Some(minutes) = overrides.minutes {
            base.parameters.synth.n_minutes = minutes;
        }
        if let Some(events) = overrides.events {
            base.parameters.synth.n_events = events;
        }
        if let Some(first) = overrides.first_event_window {
            base.parameters.synth.first_event_window = first;
        }
        if let Some(spacing) = overrides.event_spacing {
            base.parameters.synth.event_spacing = spacing;
        }
        if overrides.dump_mi_matrices {
            base.dump_mi_matrices = true;
        }
        if overrides.dump_strengths {
            base.dump_strengths = true;
        }

        let config = RunConfig {
            data: base
                .data
                .ok_or_else(|| CliError::config("no data path given (flag --data or key `data`)"))?,
            output: base
                .output
                .ok_or_else(|| CliError::config("no output path given (flag --output or key `output`)"))?,
            parallelism: base.parallelism,
            dump_mi_matrices: base.dump_mi_matrices,
            dump_strengths: base.dump_strengths,
            parameters: base.parameters,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        let p = &self.parameters;
        if p.window_length < 2 {
            return Err(CliError::config("window_length must be at least 2"));
        }
        if p.target_lag == 0 {
            return Err(CliError::config("target_lag must be at least 1"));
        }
        if !(p.epsilon.is_finite() && p.epsilon > 0.0) {
            return Err(CliError::config("epsilon must be positive"));
        }
        if !(p.histogram_width.is_finite() && p.histogram_width > 0.0) {
            return Err(CliError::config("histogram_width must be positive"));
        }
        if p.horizons.is_empty() || p.horizons.iter().any(|s| *s == 0) {
            return Err(CliError::config("horizons must be nonempty positive integers"));
        }
        let mut sorted = p.horizons.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != p.horizons {
            return Err(CliError::config("horizons must be sorted and unique"));
        }
        if !(p.grid_step > 0.0 && p.grid_step <= 1.0) {
            return Err(CliError::config("grid_step must lie in (0, 1]"));
        }
        let steps = 1.0 / p.grid_step;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(CliError::config("grid_step must divide [0, 1] evenly"));
        }
        if self.parallelism > 512 {
            return Err(CliError::config("parallelism is unreasonably large"));
        }
        if p.arima.p_max > 5 || p.arima.d_max > 2 || p.arima.q_max > 5 {
            return Err(CliError::config("arima grid bounds exceed p<=5, d<=2, q<=5"));
        }
        if p.arima.exog_order[1] > 2 {
            return Err(CliError::config("exog_order differencing must be at most 2"));
        }
        if p.eig_max_iter == 0 || !(p.eig_tol > 0.0) {
            return Err(CliError::config("eigenvector settings must be positive"));
        }
        self.bin_rule()?;
        self.distance_transform()?;
        for spec in &p.combine {
            spec.regression_kind()?;
        }
        Ok(())
    }

    pub fn bin_rule(&self) -> CliResult<BinRule> {
        if self.parameters.bin_rule.is_empty() {
            return Ok(BinRule::default_for_window(self.parameters.window_length));
        }
        BinRule::from_str(&self.parameters.bin_rule).map_err(CliError::Core)
    }

    pub fn mi_mode(&self) -> MiMode {
        if self.parameters.mi_literal_pairs {
            MiMode::ExcludeEqualLabels
        } else {
            MiMode::Standard
        }
    }

    pub fn distance_transform(&self) -> CliResult<DistanceTransform> {
        match self.parameters.betweenness_transform.as_str() {
            "reciprocal" => Ok(DistanceTransform::Reciprocal),
            "max-minus-weight" => Ok(DistanceTransform::MaxMinusWeight),
            other => Err(CliError::config(format!(
                "unknown betweenness_transform {other:?} (reciprocal or max-minus-weight)"
            ))),
        }
    }

    pub fn analysis_options(&self) -> CliResult<AnalysisOptions> {
        Ok(AnalysisOptions {
            bin_rule: self.bin_rule()?,
            mi_mode: self.mi_mode(),
            use_returns: self.parameters.use_returns,
            histogram_width: self.parameters.histogram_width,
            epsilon: self.parameters.epsilon,
            horizons: self.parameters.horizons.clone(),
            eig_tol: self.parameters.eig_tol,
            eig_max_iter: self.parameters.eig_max_iter,
            distance_transform: self.distance_transform()?,
            modularity_seed: self.parameters.modularity_seed,
        })
    }
}
