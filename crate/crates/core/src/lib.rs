//! Hourly mutual-information networks from minute-resolution price panels.
//!
//! The crate turns a panel of per-minute stock closes into a sequence of
//! complete weighted graphs (one per 60-minute window, edge weights given
//! by pairwise mutual information), derives per-window predictors from the
//! node-strength distributions and graph structure, scores them against
//! future index changes, and fits ARIMA/ARIMAX models on the index series.

pub mod arima;
pub mod error;
pub mod graph;
pub mod mi;
pub mod optim;
pub mod panel;
pub mod pipeline;
pub mod predictors;
pub mod regress;
pub mod strength;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
