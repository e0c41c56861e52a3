//! Quantifies a region's economic impact from and recovery after a natural
//! disaster using daily-aggregated transaction time series.
//!
//! The pipeline builds a "normality model" — a Bayesian structural
//! time-series counterfactual fit on unaffected control regions — then
//! derives recovery times, cumulative losses, preparedness indicators, and
//! spatial/segment breakdowns. A seeded synthetic generator with closed-form
//! ground truth backs the test suite and ships as a subcommand.

pub mod config;
pub mod counterfactual;
pub mod geo;
pub mod impact;
pub mod ingest;
pub mod prepared;
pub mod report;
pub mod rng;
pub mod series;
pub mod synth;

pub use series::{Calendar, DailySeries, SeriesPanel, SeriesUnit};
