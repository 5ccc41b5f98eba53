//! Seller-side outcome-fair online allocation.
//!
//! The crate models a marketplace of sellers `j` with items `k`, each shown
//! to a stream of customer visits. Every round one item is displayed; the
//! objective is collected revenue plus a concave bonus on each seller's
//! aggregated outcome (clicks, purchases or revenue).
//!
//! - [`regularizer`]: the concave bonus `r(a)`, its supergradient and dual box.
//! - [`predictor`]: click/purchase rate estimators with staged online updates.
//! - [`engine`]: the online loop: fairness-aware scores `(p + λ)·ĉ`,
//!   inverse-gap exploration, projected dual descent.
//! - [`environment`]: ground-truth rates, a synthetic skewed marketplace and
//!   Bernoulli outcome sampling.
//! - [`oracle`]: full-information hindsight solvers (enumeration and dual
//!   subgradient) used as the regret baseline.
//!
//! The crate is `no_std` (with `alloc`) when built without the `std` feature.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod domain;
pub mod engine;
pub mod environment;
mod error;
pub mod metrics;
pub mod oracle;
pub mod predictor;
pub mod regularizer;

pub use domain::{Catalog, DualState, ItemRef, OutcomeBasis, OutcomeEvent, RegularizerKind, RegularizerSpec};
pub use engine::{run_episode, EngineConfig, Exploration, GammaSchedule};
pub use environment::{Environment, SynthSpec};
pub use error::{Error, Result};
pub use metrics::RunMetrics;
pub use predictor::{Estimator, EstimatorConfig, EstimatorKind, EstimatorState};
