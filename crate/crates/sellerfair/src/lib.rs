//! Std companion to `sellerfair-core`: JSON run configs, clickstream
//! ingestion, β/price sweeps against the ε-greedy benchmark, and CSV/JSON
//! exports. The `sellerfair` binary wraps all of it.

pub mod config;
mod error;
pub mod evs;
pub mod export;
pub mod sweep;

pub use config::{EnvironmentConfig, RunConfig};
pub use error::{Error, Result};
pub use evs::{ingest_evs, BrandRow, BrandTable, IngestOptions, IngestReport};
pub use sweep::{
    aggregate, beta_multipliers_to_spec, export_histogram, run_benchmark, run_sweep, SweepPlan, SweepReport,
};
