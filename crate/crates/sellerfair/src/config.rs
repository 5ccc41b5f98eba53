//! JSON run configuration.
//!
//! ```json
//! {
//!   "horizon": 200000,
//!   "seed": 7,
//!   "eta": 1.0,
//!   "exploration": "inverse_gap",
//!   "gamma0": 100.0,
//!   "gamma_schedule": "sqrt",
//!   "regularizer": { "kind": "above_target", "outcome_basis": "click", "alpha": 5.0, "beta_multiplier": 1.0 },
//!   "predictor": { "kind": "empirical_mean", "retrain_every": 1 },
//!   "environment": { "type": "synthetic", "sellers": 50, "seed": 1000 },
//!   "sweep": { "multipliers": [0.0, 0.1, 0.2, 0.5, 1.0, 2.0], "seeds": [0, 1, 2, 3, 4] }
//! }
//! ```
//!
//! `alpha` and `beta` take a scalar (shared by all sellers) or one value per
//! seller. `beta_multiplier`, when present, replaces `beta` with the
//! multiplier times each seller's mean item price. Relative paths are resolved
//! against the directory of the config file.

use std::path::{Path, PathBuf};

use sellerfair_core::engine::default_eta;
use sellerfair_core::environment::build_synth;
use sellerfair_core::{
    Catalog, EngineConfig, Environment, EstimatorConfig, Exploration, GammaSchedule, OutcomeBasis, RegularizerKind,
    RegularizerSpec, SynthSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evs::{self, BrandTable, IngestOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationKind {
    Off,
    #[default]
    InverseGap,
    EpsilonGreedy,
}

/// A scalar shared by every seller, or one value per seller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSeller {
    Scalar(f64),
    Each(Vec<f64>),
}

impl Default for PerSeller {
    fn default() -> Self {
        PerSeller::Scalar(0.0)
    }
}

impl PerSeller {
    pub fn expand(&self, sellers: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerSeller::Scalar(v) => Ok(vec![*v; sellers]),
            PerSeller::Each(v) if v.len() == sellers => Ok(v.clone()),
            PerSeller::Each(v) => Err(Error::Config(format!(
                "{what} has {} entries for {sellers} sellers",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizerConfig {
    pub kind: RegularizerKind,
    pub outcome_basis: OutcomeBasis,
    pub alpha: PerSeller,
    pub beta: PerSeller,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_multiplier: Option<f64>,
    /// Per-round targets; defaults to `alpha / horizon`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<Vec<f64>>,
}

impl RegularizerConfig {
    pub fn to_spec(&self, catalog: &Catalog) -> Result<RegularizerSpec> {
        let m = catalog.num_sellers();
        let alpha = self.alpha.expand(m, "alpha")?;
        let beta = match self.beta_multiplier {
            Some(mult) => crate::sweep::multiplier_beta(catalog, mult)?,
            None => self.beta.expand(m, "beta")?,
        };
        let spec = match self.kind {
            RegularizerKind::None => RegularizerSpec {
                alpha,
                ..RegularizerSpec::none(m, self.outcome_basis)
            },
            RegularizerKind::AboveTarget => RegularizerSpec::above_target(self.outcome_basis, alpha, beta),
            RegularizerKind::MaxMin => RegularizerSpec {
                kind: RegularizerKind::MaxMin,
                outcome_basis: self.outcome_basis,
                alpha,
                beta,
            },
        };
        sellerfair_core::domain::validate(catalog, &spec)?;
        Ok(spec)
    }
}

/// Where ground-truth rates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Synthetic(SynthSpec),
    /// A brands table written by `ingest-evs`.
    Brands {
        path: PathBuf,
        #[serde(default = "yes")]
        normalize_prices: bool,
    },
    /// A raw event log, ingested on load.
    EventLog {
        path: PathBuf,
        #[serde(default = "default_threshold")]
        view_threshold: u64,
        #[serde(default = "yes")]
        normalize_prices: bool,
    },
    Explicit {
        prices: Vec<Vec<f64>>,
        ctr: Vec<f64>,
        cvr_given_click: Vec<f64>,
    },
}

fn yes() -> bool {
    true
}

fn default_threshold() -> u64 {
    evs::DEFAULT_VIEW_THRESHOLD
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Synthetic(SynthSpec::default())
    }
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvironmentConfig::Synthetic(spec) => Ok(build_synth(spec)?),
            EnvironmentConfig::Brands { path, normalize_prices } => {
                BrandTable::read_csv_file(path)?.to_environment(*normalize_prices)
            }
            EnvironmentConfig::EventLog {
                path,
                view_threshold,
                normalize_prices,
            } => evs::ingest_evs_file(
                path,
                IngestOptions {
                    view_threshold: *view_threshold,
                },
            )?
            .table
            .to_environment(*normalize_prices),
            EnvironmentConfig::Explicit {
                prices,
                ctr,
                cvr_given_click,
            } => Ok(Environment::new(
                Catalog::new(prices.clone())?,
                ctr.clone(),
                cvr_given_click.clone(),
            )?),
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        match self {
            EnvironmentConfig::Brands { path, .. } | EnvironmentConfig::EventLog { path, .. } => {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
            EnvironmentConfig::Synthetic(_) | EnvironmentConfig::Explicit { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub multipliers: Vec<f64>,
    pub seeds: Vec<u64>,
    pub benchmark_epsilon: f64,
}

pub const DEFAULT_MULTIPLIERS: [f64; 6] = [0.0, 0.1, 0.2, 0.5, 1.0, 2.0];
pub const DEFAULT_BENCHMARK_EPSILON: f64 = 0.05;

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            multipliers: DEFAULT_MULTIPLIERS.to_vec(),
            seeds: (0..5).collect(),
            benchmark_epsilon: DEFAULT_BENCHMARK_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    /// Dual step size; defaults to `1/sqrt(horizon)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default)]
    pub exploration: ExplorationKind,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    #[serde(default)]
    pub gamma_schedule: GammaSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_override: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub regularizer: RegularizerConfig,
    #[serde(default)]
    pub predictor: EstimatorConfig,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_gamma0() -> f64 {
    sellerfair_core::engine::DEFAULT_GAMMA0
}

fn default_epsilon() -> f64 {
    DEFAULT_BENCHMARK_EPSILON
}

impl RunConfig {
    pub fn new(horizon: u64, environment: EnvironmentConfig) -> Self {
        Self {
            horizon,
            seed: 0,
            eta: None,
            exploration: ExplorationKind::default(),
            gamma0: default_gamma0(),
            gamma_schedule: GammaSchedule::default(),
            h_override: None,
            epsilon: default_epsilon(),
            regularizer: RegularizerConfig::default(),
            predictor: EstimatorConfig::default(),
            environment,
            sweep: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    /// Loads a config file, resolving relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.environment.resolve_paths(base);
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that do not need the environment.
    pub fn check(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::Config(format!("eta must be nonnegative, got {eta}")));
            }
        }
        if !(self.gamma0 >= 0.0 && self.gamma0.is_finite()) {
            return Err(Error::Config(format!(
                "gamma0 must be nonnegative, got {}",
                self.gamma0
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must be in [0, 1], got {}",
                self.epsilon
            )));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.seeds.is_empty() {
                return Err(Error::Config("sweep needs at least one seed".into()));
            }
            if let Some(m) = sweep.multipliers.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
                return Err(Error::Config(format!("sweep multiplier must be nonnegative, got {m}")));
            }
        }
        Ok(())
    }

    pub fn exploration(&self) -> Exploration {
        match self.exploration {
            ExplorationKind::Off => Exploration::Off,
            ExplorationKind::InverseGap => Exploration::InverseGap {
                gamma0: self.gamma0,
                schedule: self.gamma_schedule,
                h_override: self.h_override,
            },
            ExplorationKind::EpsilonGreedy => Exploration::EpsilonGreedy { epsilon: self.epsilon },
        }
    }

    pub fn engine_config(&self, catalog: &Catalog) -> Result<EngineConfig> {
        self.check()?;
        let regularizer = self.regularizer.to_spec(catalog)?;
        if let Some(h) = self.h_override.filter(|&h| h < catalog.num_items()) {
            return Err(sellerfair_core::Error::InvalidH {
                h,
                items: catalog.num_items(),
            }
            .into());
        }
        Ok(EngineConfig {
            horizon: self.horizon,
            seed: self.seed,
            eta: self.eta.unwrap_or_else(|| default_eta(self.horizon)),
            exploration: self.exploration(),
            regularizer,
            target_rate: self.regularizer.target_rate.clone(),
        })
    }

    pub fn sweep_config(&self) -> SweepConfig {
        self.sweep.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let config = RunConfig::from_json(r#"{"horizon": 10}"#).unwrap();
        assert_eq!(config, RunConfig::new(10, EnvironmentConfig::default()));
        let env = config.environment.build().unwrap();
        let engine = config.engine_config(env.catalog()).unwrap();
        assert_eq!(engine.eta, default_eta(10));
        assert_eq!(engine.exploration, Exploration::default());
        assert_eq!(engine.regularizer.kind, RegularizerKind::None);
    }

    #[test]
    fn scalar_and_per_seller_parameters() {
        let text = r#"{
            "horizon": 4,
            "regularizer": {"kind": "above_target", "alpha": [1, 2], "beta": 0.5},
            "environment": {"type": "explicit", "prices": [[1.0], [2.0, 4.0]], "ctr": [0.1, 0.2, 0.3], "cvr_given_click": [1, 1, 1]}
        }"#;
        let config = RunConfig::from_json(text).unwrap();
        let env = config.environment.build().unwrap();
        let spec = config.engine_config(env.catalog()).unwrap().regularizer;
        assert_eq!(spec.alpha, vec![1.0, 2.0]);
        assert_eq!(spec.beta, vec![0.5, 0.5]);
    }

    #[test]
    fn beta_multiplier_uses_mean_seller_price() {
        let text = r#"{
            "horizon": 4,
            "regularizer": {"kind": "above_target", "alpha": 1, "beta": 9, "beta_multiplier": 0.5},
            "environment": {"type": "explicit", "prices": [[2.0, 4.0], [1.0]], "ctr": [0.1, 0.2, 0.3], "cvr_given_click": [1, 1, 1]}
        }"#;
        let config = RunConfig::from_json(text).unwrap();
        let env = config.environment.build().unwrap();
        assert_eq!(config.regularizer.to_spec(env.catalog()).unwrap().beta, vec![1.5, 0.5]);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{"horizon": 0}"#,
            r#"{"horizon": 5, "eta": -1}"#,
            r#"{"horizon": 5, "gamma0": -1}"#,
            r#"{"horizon": 5, "epsilon": 2}"#,
            r#"{"horizon": 5, "sweep": {"seeds": []}}"#,
            r#"{"horizon": 5, "bogus": 1}"#,
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
        let config = RunConfig::from_json(r#"{"horizon": 5, "regularizer": {"alpha": [1, 2]}}"#).unwrap();
        let env = config.environment.build().unwrap();
        assert!(config.engine_config(env.catalog()).is_err());
    }

    #[test]
    fn h_override_below_item_count_is_rejected() {
        let text = r#"{"horizon": 3, "h_override": 1,
            "environment": {"type": "explicit", "prices": [[1.0], [1.0]], "ctr": [0.5, 0.5], "cvr_given_click": [1, 1]}}"#;
        let config = RunConfig::from_json(text).unwrap();
        let env = config.environment.build().unwrap();
        assert!(config.engine_config(env.catalog()).is_err());
        let off = RunConfig {
            exploration: ExplorationKind::Off,
            ..config
        };
        assert!(off.engine_config(env.catalog()).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"horizon": 3, "environment": {"type": "brands", "path": "brands.csv"}}"#,
        )
        .unwrap();
        let config = RunConfig::from_file(&path).unwrap();
        assert_eq!(
            config.environment,
            EnvironmentConfig::Brands {
                path: dir.path().join("brands.csv"),
                normalize_prices: true
            }
        );
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            Just(0.0),
            0.0..1e6f64,
            any::<f64>().prop_filter("finite", |v| v.is_finite() && *v >= 0.0)
        ]
    }

    fn per_seller() -> impl Strategy<Value = PerSeller> {
        prop_oneof![
            finite().prop_map(PerSeller::Scalar),
            proptest::collection::vec(finite(), 0..4).prop_map(PerSeller::Each),
        ]
    }

    fn environment() -> impl Strategy<Value = EnvironmentConfig> {
        prop_oneof![
            (1usize..100, 0u64..u64::MAX, 0.01..5.0f64).prop_map(|(sellers, seed, pareto_shape)| {
                EnvironmentConfig::Synthetic(SynthSpec {
                    sellers,
                    seed,
                    pareto_shape,
                    ..SynthSpec::default()
                })
            }),
            ("[a-z]{1,8}\\.csv", any::<bool>()).prop_map(|(p, normalize_prices)| EnvironmentConfig::Brands {
                path: p.into(),
                normalize_prices
            }),
            ("[a-z]{1,8}", any::<u64>(), any::<bool>()).prop_map(|(p, view_threshold, normalize_prices)| {
                EnvironmentConfig::EventLog {
                    path: p.into(),
                    view_threshold,
                    normalize_prices,
                }
            }),
            proptest::collection::vec(finite(), 1..4).prop_map(|v| EnvironmentConfig::Explicit {
                prices: vec![v.clone()],
                ctr: v.clone(),
                cvr_given_click: v,
            }),
        ]
    }

    prop_compose! {
        fn run_config()(
            horizon in 1u64..u64::MAX,
            seed in any::<u64>(),
            eta in proptest::option::of(finite()),
            exploration in prop_oneof![
                Just(ExplorationKind::Off),
                Just(ExplorationKind::InverseGap),
                Just(ExplorationKind::EpsilonGreedy)
            ],
            gamma0 in finite(),
            gamma_schedule in prop_oneof![
                Just(GammaSchedule::Constant),
                Just(GammaSchedule::Sqrt),
                Just(GammaSchedule::Linear)
            ],
            h_override in proptest::option::of(1usize..1000),
            epsilon in 0.0..=1.0f64,
            (alpha, beta) in (per_seller(), per_seller()),
            beta_multiplier in proptest::option::of(finite()),
            retrain_every in 1u64..1000,
            environment in environment(),
            sweep in proptest::option::of(
                (proptest::collection::vec(finite(), 0..6), proptest::collection::vec(any::<u64>(), 1..6), 0.0..=1.0f64)
            ),
        ) -> RunConfig {
            RunConfig {
                horizon,
                seed,
                eta,
                exploration,
                gamma0,
                gamma_schedule,
                h_override,
                epsilon,
                regularizer: RegularizerConfig {
                    kind: RegularizerKind::AboveTarget,
                    outcome_basis: OutcomeBasis::Purchase,
                    alpha,
                    beta,
                    beta_multiplier,
                    target_rate: None,
                },
                predictor: EstimatorConfig { retrain_every, ..EstimatorConfig::default() },
                environment,
                sweep: sweep.map(|(multipliers, seeds, benchmark_epsilon)| SweepConfig {
                    multipliers,
                    seeds,
                    benchmark_epsilon,
                }),
            }
        }
    }

    proptest! {
        #[test]
        fn json_round_trip(config in run_config()) {
            let text = config.to_json().unwrap();
            prop_assert_eq!(RunConfig::from_json(&text).unwrap(), config);
        }
    }
}
