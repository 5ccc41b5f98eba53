//! Rate estimators `ĉ_jk` consumed by the engine.
//!
//! The engine only talks to the [`Estimator`] trait. Two built-in estimators
//! live in [`EstimatorState`]: an oracle that reports the environment's true
//! rates, and a smoothed empirical mean over observed displays.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{Catalog, OutcomeBasis, OutcomeEvent};
use crate::environment::Environment;
use crate::error::{Error, Result};

/// Per-round context handed to estimators. The built-in estimators ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Context {
    pub round: u64,
}

/// Estimated rate per item (flat index), each in `[0, 1]`.
pub type RateEstimate = [f64];

/// Anything that predicts per-item rates and learns from outcomes.
pub trait Estimator {
    /// Current estimate for every item of `catalog`, indexed by flat index.
    fn predict(&mut self, context: &Context, catalog: &Catalog) -> Result<&RateEstimate>;

    /// Feeds back the outcome of one displayed item.
    fn observe(&mut self, event: &OutcomeEvent, catalog: &Catalog);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimatorKind {
    Oracle,
    #[default]
    EmpiricalMean,
}

/// Estimator settings. `retrain_every` is the fold-in cadence `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub prior_successes: f64,
    pub prior_failures: f64,
    pub retrain_every: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::EmpiricalMean,
            prior_successes: 1.0,
            prior_failures: 1.0,
            retrain_every: 1,
        }
    }
}

impl EstimatorConfig {
    pub fn oracle() -> Self {
        Self {
            kind: EstimatorKind::Oracle,
            ..Self::default()
        }
    }

    /// Instantiates the estimator for `env`, learning the outcome named by `basis`.
    pub fn build(&self, env: &Environment, basis: OutcomeBasis) -> Result<EstimatorState> {
        match self.kind {
            EstimatorKind::Oracle => Ok(EstimatorState::oracle(env.target_rates(basis))),
            EstimatorKind::EmpiricalMean => EstimatorState::empirical(
                env.catalog().num_items(),
                self.prior_successes,
                self.prior_failures,
                self.retrain_every,
                basis,
            ),
        }
    }
}

/// Built-in estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    kind: EstimatorKind,
    target: OutcomeBasis,
    displays: Vec<u64>,
    successes: Vec<u64>,
    prior: (f64, f64),
    retrain_every: u64,
    staged: Vec<(usize, bool)>,
    observed: u64,
    rates: Vec<f64>,
}

impl EstimatorState {
    /// Reports `rates` forever; `observe` is a no-op.
    pub fn oracle(rates: Vec<f64>) -> Self {
        Self {
            kind: EstimatorKind::Oracle,
            target: OutcomeBasis::Click,
            displays: Vec::new(),
            successes: Vec::new(),
            prior: (0.0, 0.0),
            retrain_every: 1,
            staged: Vec::new(),
            observed: 0,
            rates,
        }
    }

    /// Posterior-mean estimator `(s + a0) / (n + a0 + b0)` for `items` items.
    pub fn empirical(
        items: usize,
        prior_successes: f64,
        prior_failures: f64,
        retrain_every: u64,
        target: OutcomeBasis,
    ) -> Result<Self> {
        for (index, value) in [prior_successes, prior_failures].into_iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::NegativeParameter {
                    what: "prior pseudo-count",
                    index,
                    value,
                });
            }
        }
        if prior_successes + prior_failures <= 0.0 {
            return Err(Error::InvalidConfig("prior pseudo-counts must not both be zero".into()));
        }
        if retrain_every == 0 {
            return Err(Error::InvalidConfig("retrain cadence must be at least 1".into()));
        }
        let mean = prior_successes / (prior_successes + prior_failures);
        Ok(Self {
            kind: EstimatorKind::EmpiricalMean,
            target,
            displays: vec![0; items],
            successes: vec![0; items],
            prior: (prior_successes, prior_failures),
            retrain_every,
            staged: Vec::new(),
            observed: 0,
            rates: vec![mean; items],
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Folded display count of flat item `index`.
    pub fn displays(&self, index: usize) -> u64 {
        self.displays.get(index).copied().unwrap_or(0)
    }

    pub fn successes(&self, index: usize) -> u64 {
        self.successes.get(index).copied().unwrap_or(0)
    }

    /// Current estimate without the catalog check.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn posterior_mean(&self, index: usize) -> f64 {
        let (a0, b0) = self.prior;
        (self.successes[index] as f64 + a0) / (self.displays[index] as f64 + a0 + b0)
    }

    fn fold(&mut self) {
        let staged = core::mem::take(&mut self.staged);
        for &(index, success) in &staged {
            self.displays[index] += 1;
            self.successes[index] += u64::from(success);
        }
        for &(index, _) in &staged {
            self.rates[index] = self.posterior_mean(index);
        }
        self.staged = staged;
        self.staged.clear();
    }
}

impl Estimator for EstimatorState {
    fn predict(&mut self, _context: &Context, catalog: &Catalog) -> Result<&RateEstimate> {
        if self.rates.len() != catalog.num_items() {
            return Err(Error::UnknownItem {
                expected: self.rates.len(),
                got: catalog.num_items(),
            });
        }
        Ok(&self.rates)
    }

    fn observe(&mut self, event: &OutcomeEvent, catalog: &Catalog) {
        if self.kind == EstimatorKind::Oracle {
            return;
        }
        let success = match self.target {
            OutcomeBasis::Click => event.clicked,
            OutcomeBasis::Purchase | OutcomeBasis::Revenue => event.purchased,
        };
        self.staged.push((catalog.index_of(event.displayed), success));
        self.observed += 1;
        if self.observed.is_multiple_of(self.retrain_every) {
            self.fold();
        }
    }
}
