//! Synthetic minute-bar fixture generator.
//!
//! Produces geometric-random-walk tickers plus an index series in points,
//! with injected co-movement regimes. A regime spans two consecutive
//! windows in which a subset of tickers shares a common price trend; the
//! index makes its large move during the second window, so the network
//! signature precedes the move by one window. Both directions start from
//! the same sweep, keeping the onset distribution shift direction-blind;
//! a down regime's sweep then widens through the move window (a selling
//! cascade) while an up regime's fizzles, which hands the
//! relative-strength metric signed information. Regime order
//! and spacing are randomized from the seed. Output is a directory in the
//! exact format the ingestion layer reads, plus a regime schedule for
//! tests and plotting.

use std::io::Write;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::panel::MANIFEST_FILE;

/// Direction of an injected index move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveDirection {
    Down,
    Up,
}

impl MoveDirection {
    pub fn sign(self) -> f64 {
        match self {
            MoveDirection::Down => -1.0,
            MoveDirection::Up => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MoveDirection::Down => "down",
            MoveDirection::Up => "up",
        }
    }
}

/// One injected regime: co-movement spans `onset_window` and
/// `move_window`; the index move lands in `move_window`. Window ordinals
/// are 1-based, matching report output.
#[derive(Debug, Clone, Copy)]
pub struct EventSpec {
    pub onset_window: usize,
    pub move_window: usize,
    pub direction: MoveDirection,
}

/// Generator parameters.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_tickers: usize,
    pub n_minutes: usize,
    pub window_length: usize,
    pub seed: u64,
    /// Epoch seconds of the first minute bar.
    pub start_epoch: i64,
    /// Number of injected regimes; signs are balanced and shuffled.
    pub n_events: usize,
    /// 0-based window where the first regime may start.
    pub first_event_window: usize,
    /// Typical windows between regime onsets; jittered by up to 2.
    pub event_spacing: usize,
    /// Per-minute idiosyncratic log-return volatility.
    pub ticker_vol: f64,
    /// Fraction of tickers swept during a regime's onset window.
    pub onset_fraction: f64,
    /// Fraction swept during a down regime's move window (a superset of
    /// the onset sweep). Up regimes sweep nobody in their move window.
    pub down_move_fraction: f64,
    /// Common log trend per window for swept tickers, either direction.
    pub comove_drift: f64,
    /// Index move during the regime's second window, in index points.
    pub index_move: f64,
    /// Index starting level in points.
    pub index_start: f64,
    /// Per-minute index noise in points.
    pub index_vol: f64,
    /// Probability that any ticker minute is dropped from its file.
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_tickers: 475,
            n_minutes: 5340,
            window_length: 60,
            seed: 20_160_922,
            start_epoch: 1_474_551_000,
            n_events: 8,
            first_event_window: 16,
            event_spacing: 8,
            ticker_vol: 6e-4,
            onset_fraction: 0.45,
            down_move_fraction: 0.75,
            comove_drift: 0.013,
            index_move: 25.0,
            index_start: 2100.0,
            index_vol: 0.05,
            missing_rate: 0.002,
        }
    }
}

impl SynthConfig {
    pub fn n_windows(&self) -> usize {
        self.n_minutes / self.window_length
    }

    /// The randomized schedule: balanced shuffled directions, jittered
    /// spacing. Depends only on the seed and the schedule fields.
    pub fn events(&self) -> Vec<EventSpec> {
        let mut rng = schedule_rng(self.seed);
        let mut directions: Vec<MoveDirection> = (0..self.n_events)
            .map(|k| {
                if k < self.n_events / 2 {
                    MoveDirection::Down
                } else {
                    MoveDirection::Up
                }
            })
            .collect();
        directions.shuffle(&mut rng);
        let mut events = Vec::with_capacity(self.n_events);
        let mut onset = self.first_event_window;
        for direction in directions {
            events.push(EventSpec {
                onset_window: onset + 1,
                move_window: onset + 2,
                direction,
            });
            let jitter: i64 = rng.gen_range(-2..=2);
            onset = (onset as i64 + self.event_spacing as i64 + jitter).max(onset as i64 + 4)
                as usize;
        }
        events
    }

    fn validate(&self) -> Result<()> {
        if self.n_tickers < 2 {
            return Err(Error::InvalidArgument("need at least 2 tickers".into()));
        }
        if self.window_length < 2 || self.n_minutes < self.window_length {
            return Err(Error::InvalidArgument(
                "need at least one full window of minutes".into(),
            ));
        }
        if !(0.0..=0.2).contains(&self.missing_rate)
            || !(0.0..=1.0).contains(&self.onset_fraction)
            || !(0.0..=1.0).contains(&self.down_move_fraction)
        {
            return Err(Error::InvalidArgument(
                "missing rate must lie in [0, 0.2] and sweep fractions in [0, 1]".into(),
            ));
        }
        let windows = self.n_windows();
        if let Some(last) = self.events().last() {
            if last.move_window + 1 > windows {
                return Err(Error::InvalidArgument(format!(
                    "event schedule runs to window {} but only {} windows fit",
                    last.move_window, windows
                )));
            }
        }
        Ok(())
    }
}

/// What was generated.
#[derive(Debug)]
pub struct SynthReport {
    pub events: Vec<EventSpec>,
    pub n_windows: usize,
    pub files_written: usize,
}

fn schedule_rng(seed: u64) -> ChaCha8Rng {
    // Separate stream from the price draws so schedule and noise do not
    // interact.
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generate the fixture into `dir`: one delimited file per ticker, the
/// index series, the manifest and a `regimes.txt` schedule.
pub fn write_fixture(dir: &Path, config: &SynthConfig) -> Result<SynthReport> {
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;

    let n = config.n_tickers;
    let minutes = config.n_minutes;
    let window = config.window_length;
    let windows = config.n_windows();
    let events = config.events();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Per-window regime profile: event id (or none) per window, and the
    // per-minute index drift (second regime window only).
    let mut event_of_window: Vec<Option<usize>> = vec![None; windows];
    let mut index_drift = vec![0.0; windows];
    for (id, event) in events.iter().enumerate() {
        event_of_window[event.onset_window - 1] = Some(id);
        event_of_window[event.move_window - 1] = Some(id);
        index_drift[event.move_window - 1] =
            event.direction.sign() * config.index_move / window as f64;
    }

    // Per-event sweep order, drawn up front so the stream of random draws
    // does not depend on later loops. A ticker's rank in the permutation
    // decides when the sweep reaches it.
    let mut sweep_rank: Vec<Vec<usize>> = Vec::with_capacity(events.len());
    for _ in &events {
        let mut picks: Vec<usize> = (0..n).collect();
        picks.shuffle(&mut rng);
        let mut rank = vec![0usize; n];
        for (r, &i) in picks.iter().enumerate() {
            rank[i] = r;
        }
        sweep_rank.push(rank);
    }
    let onset_count = ((n as f64) * config.onset_fraction).round() as usize;
    let down_move_count = ((n as f64) * config.down_move_fraction).round() as usize;

    // Index path in points.
    let mut index = Vec::with_capacity(minutes);
    let mut level = config.index_start;
    for t in 0..minutes {
        let w = (t / window).min(windows - 1);
        level += index_drift[w] + config.index_vol * normal(&mut rng);
        index.push(level);
    }

    let timestamp = |t: usize| config.start_epoch + (t as i64) * 60;
    let write_series = |name: &str, rows: &[(i64, f64)]| -> Result<()> {
        let path = dir.join(format!("{name}.csv"));
        let file = std::fs::File::create(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "timestamp,close")?;
            for (ts, close) in rows {
                writeln!(out, "{ts},{close}")?;
            }
            out.flush()
        };
        write().map_err(|e| Error::Io { path, source: e })
    };

    let mut files_written = 0;
    let mut rows: Vec<(i64, f64)> = Vec::with_capacity(minutes);
    for i in 0..n {
        let start_price: f64 = rng.gen_range(20.0..200.0);
        let mut log_price = start_price.ln();
        rows.clear();
        for t in 0..minutes {
            let w = (t / window).min(windows - 1);
            let mut step = config.ticker_vol * normal(&mut rng);
            if let Some(id) = event_of_window[w] {
                let event = &events[id];
                let swept_count = if w == event.onset_window - 1 {
                    onset_count
                } else if event.direction == MoveDirection::Down {
                    down_move_count
                } else {
                    0
                };
                if sweep_rank[id][i] < swept_count {
                    step += event.direction.sign() * config.comove_drift / window as f64;
                }
            }
            log_price += step;
            // Missing minutes are dropped rows, never the first minute.
            if t > 0 && config.missing_rate > 0.0 && rng.gen_bool(config.missing_rate) {
                continue;
            }
            rows.push((timestamp(t), log_price.exp()));
        }
        write_series(&format!("T{:03}", i + 1), &rows)?;
        files_written += 1;
    }

    let index_rows: Vec<(i64, f64)> = index
        .iter()
        .enumerate()
        .map(|(t, v)| (timestamp(t), *v))
        .collect();
    write_series("INDEX", &index_rows)?;
    files_written += 1;

    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, "index = \"INDEX\"\n").map_err(|e| Error::Io {
        path: manifest_path,
        source: e,
    })?;

    // Not `.csv`: the loader treats every csv file in the directory as a
    // price series.
    let regimes_path = dir.join("regimes.txt");
    let mut regimes = String::from("event,onset_window,move_window,direction\n");
    for (k, event) in events.iter().enumerate() {
        regimes.push_str(&format!(
            "{},{},{},{}\n",
            k + 1,
            event.onset_window,
            event.move_window,
            event.direction.label()
        ));
    }
    std::fs::write(&regimes_path, regimes).map_err(|e| Error::Io {
        path: regimes_path,
        source: e,
    })?;

    Ok(SynthReport {
        events,
        n_windows: windows,
        files_written: files_written + 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{impute_locf, load_panel, split_windows};

    fn small_config() -> SynthConfig {
        SynthConfig {
            n_tickers: 6,
            n_minutes: 1440,
            n_events: 2,
            first_event_window: 14,
            event_spacing: 6,
            missing_rate: 0.01,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn schedule_is_balanced_spaced_and_validated() {
        let config = SynthConfig::default();
        let events = config.events();
        assert_eq!(events.len(), 8);
        let downs = events
            .iter()
            .filter(|e| e.direction == MoveDirection::Down)
            .count();
        assert_eq!(downs, 4);
        for pair in events.windows(2) {
            assert!(pair[1].onset_window >= pair[0].move_window + 3);
        }
        for event in &events {
            assert_eq!(event.move_window, event.onset_window + 1);
        }
        assert!(events.last().unwrap().move_window < config.n_windows());

        let bad = SynthConfig {
            first_event_window: 23,
            ..small_config()
        };
        assert!(write_fixture(Path::new("/nonexistent-unused"), &bad).is_err());
    }

    #[test]
    fn fixture_loads_and_splits_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config();
        let report = write_fixture(dir.path(), &config).unwrap();
        assert_eq!(report.files_written, 6 + 1 + 2);
        assert_eq!(report.n_windows, 24);

        let loaded = load_panel(dir.path(), None).unwrap();
        assert_eq!(loaded.panel.n_tickers(), 6);
        assert_eq!(loaded.panel.n_rows(), 1440);
        assert!(loaded.panel.missing_cells() > 0);
        let filled = impute_locf(&loaded.panel).unwrap();
        let split = split_windows(&filled, 60).unwrap();
        assert_eq!(split.windows.len(), 24);
        assert_eq!(split.dropped_rows, 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_fixture(a.path(), &small_config()).unwrap();
        write_fixture(b.path(), &small_config()).unwrap();
        for name in ["T001.csv", "T006.csv", "INDEX.csv", "regimes.txt"] {
            let left = std::fs::read(a.path().join(name)).unwrap();
            let right = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(left, right, "{name} differs between runs");
        }
    }

    #[test]
    fn index_moves_land_on_move_windows() {
        let dir = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            missing_rate: 0.0,
            ..small_config()
        };
        write_fixture(dir.path(), &config).unwrap();
        let loaded = load_panel(dir.path(), None).unwrap();
        let split = split_windows(&loaded.panel, 60).unwrap();
        let closes: Vec<f64> = split.windows.iter().map(|w| w.index_close).collect();
        for event in config.events() {
            let w = event.move_window - 1;
            let diff = closes[w] - closes[w - 1];
            assert!(
                diff * event.direction.sign() > config.index_move * 0.6,
                "window {} moved by {diff}",
                event.move_window
            );
            // The onset window itself carries no index move.
            let onset_diff = closes[w - 1] - closes[w - 2];
            assert!(onset_diff.abs() < config.index_move * 0.4);
        }
    }
}
