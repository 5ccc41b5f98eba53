//! Online dual gradient descent with inverse-gap exploration.
//!
//! Each round:
//! 1. ask the estimator for `ĉ`,
//! 2. score every item with `f = (p + λ_j)·ĉ` and find the best one,
//! 3. sample the displayed item: a non-best item `jk` gets probability
//!    `1 / (H + γ_t·(f_best − f_jk))`, the best item keeps the residual,
//! 4. observe the outcome and take a projected dual step
//!    `λ_j ← clamp(λ_j − η·(outcome_j − α_j/T), 0, β_j)`,
//! 5. feed the outcome back to the estimator.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{self, Catalog, DualState, ItemRef, OutcomeBasis, OutcomeEvent, RegularizerSpec};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::metrics::{MetricsBuilder, RunMetrics};
use crate::predictor::{Context, Estimator};
use crate::regularizer;

/// Fairness-aware scores and the best item (flat indices).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreBoard {
    scores: Vec<f64>,
    best: usize,
}

impl ScoreBoard {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Flat index of the highest score; ties go to the lowest index.
    pub fn best(&self) -> usize {
        self.best
    }

    pub fn best_item(&self, catalog: &Catalog) -> ItemRef {
        catalog.item_at(self.best)
    }

    /// Wraps precomputed scores.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let best = argmax(&scores);
        Self { scores, best }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-unit weight of the dual price in the score: revenue targets are
/// boosted proportionally to price.
#[inline]
fn dual_weight(basis: OutcomeBasis, price: f64) -> f64 {
    match basis {
        OutcomeBasis::Revenue => price,
        OutcomeBasis::Click | OutcomeBasis::Purchase => 1.0,
    }
}

/// Scores `(p_jk + λ_j)·ĉ_jk` for every item.
pub fn rank_scores(catalog: &Catalog, lambda: &DualState, chat: &[f64], basis: OutcomeBasis) -> ScoreBoard {
    let mut board = ScoreBoard::default();
    rank_scores_into(&mut board, catalog, lambda.as_slice(), chat, basis);
    board
}

fn rank_scores_into(board: &mut ScoreBoard, catalog: &Catalog, lambda: &[f64], chat: &[f64], basis: OutcomeBasis) {
    board.scores.clear();
    board.scores.extend(
        catalog
            .prices()
            .iter()
            .zip(catalog.owners())
            .zip(chat)
            .map(|((&p, &j), &c)| (p + lambda[j] * dual_weight(basis, p)) * c),
    );
    board.best = argmax(&board.scores);
}

/// Categorical distribution over items (flat indices).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionDistribution {
    prob: Vec<f64>,
    best: usize,
}

impl SelectionDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    pub fn best(&self) -> usize {
        self.best
    }

    #[cfg(test)]
    fn point_mass(&mut self, items: usize, at: usize) {
        self.prob.clear();
        self.prob.resize(items, 0.0);
        self.prob[at] = 1.0;
        self.best = at;
    }
}

/// Inverse-gap exploration probabilities for `scores`.
///
/// `h` must be at least the number of items so the best item's residual
/// stays at or above `1/h`.
pub fn selection_distribution(scores: &ScoreBoard, h: usize, gamma: f64) -> Result<SelectionDistribution> {
    let mut dist = SelectionDistribution::default();
    selection_distribution_into(&mut dist, scores, h, gamma)?;
    Ok(dist)
}

fn selection_distribution_into(
    dist: &mut SelectionDistribution,
    scores: &ScoreBoard,
    h: usize,
    gamma: f64,
) -> Result<()> {
    let n = scores.scores.len();
    if h < n {
        return Err(Error::InvalidH { h, items: n });
    }
    let h = h as f64;
    let top = scores.scores[scores.best];
    dist.prob.clear();
    let mut others = 0.0;
    for (i, &f) in scores.scores.iter().enumerate() {
        if i == scores.best {
            dist.prob.push(0.0);
        } else {
            let p = 1.0 / (h + gamma * (top - f));
            others += p;
            dist.prob.push(p);
        }
    }
    dist.prob[scores.best] = 1.0 - others;
    dist.best = scores.best;
    Ok(())
}

/// Draws one flat item index from `dist`.
pub fn select<R: Rng + ?Sized>(dist: &SelectionDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in dist.prob.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    dist.best
}

#[inline]
fn step_one(lambda: f64, eta: f64, outcome: f64, rate: f64, (lo, hi): (f64, f64)) -> f64 {
    (lambda - eta * (outcome - rate)).clamp(lo, hi)
}

/// Projected subgradient step on the dual prices, in place.
pub fn dual_step(lambda: &mut DualState, eta: f64, outcome_count: &[f64], target_rate: &[f64], boxes: &[(f64, f64)]) {
    for (j, l) in lambda.as_mut_slice().iter_mut().enumerate() {
        *l = step_one(*l, eta, outcome_count[j], target_rate[j], boxes[j]);
    }
}

/// How `γ_t` grows with the round index `t` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GammaSchedule {
    Constant,
    #[default]
    Sqrt,
    Linear,
}

impl GammaSchedule {
    pub fn gamma(self, gamma0: f64, round: u64) -> f64 {
        let t = round as f64;
        match self {
            GammaSchedule::Constant => gamma0,
            GammaSchedule::Sqrt => gamma0 * libm::sqrt(t),
            GammaSchedule::Linear => gamma0 * t,
        }
    }
}

/// Exploration step of the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Exploration {
    /// Always display the best-scoring item.
    Off,
    /// Inverse-gap sampling; `h_override` defaults to the item count.
    InverseGap {
        gamma0: f64,
        schedule: GammaSchedule,
        h_override: Option<usize>,
    },
    /// Uniformly random item with probability `epsilon`, else the best.
    EpsilonGreedy { epsilon: f64 },
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration::InverseGap {
            gamma0: DEFAULT_GAMMA0,
            schedule: GammaSchedule::Sqrt,
            h_override: None,
        }
    }
}

pub const DEFAULT_GAMMA0: f64 = 100.0;

/// Everything the loop needs besides the environment and estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub horizon: u64,
    pub seed: u64,
    pub eta: f64,
    pub exploration: Exploration,
    pub regularizer: RegularizerSpec,
    /// Per-round targets `ρ_j`; overrides `α_j / T` when set.
    pub target_rate: Option<Vec<f64>>,
}

impl EngineConfig {
    /// Defaults: `η = 1/sqrt(T)` and inverse-gap exploration with a sqrt schedule.
    pub fn new(horizon: u64, seed: u64, regularizer: RegularizerSpec) -> Self {
        Self {
            horizon,
            seed,
            eta: default_eta(horizon),
            exploration: Exploration::default(),
            regularizer,
            target_rate: None,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_exploration(mut self, exploration: Exploration) -> Self {
        self.exploration = exploration;
        self
    }

    fn targets(&self) -> Vec<f64> {
        match &self.target_rate {
            Some(rates) => rates.clone(),
            None => regularizer::target_rate(&self.regularizer, self.horizon),
        }
    }

    fn validate(&self, catalog: &Catalog) -> Result<()> {
        domain::validate(catalog, &self.regularizer)?;
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::NegativeParameter {
                what: "eta",
                index: 0,
                value: self.eta,
            });
        }
        if let Some(rates) = &self.target_rate {
            if rates.len() != catalog.num_sellers() {
                return Err(Error::DimensionMismatch {
                    what: "target_rate",
                    expected: catalog.num_sellers(),
                    got: rates.len(),
                });
            }
            if let Some((index, &value)) = rates.iter().enumerate().find(|(_, r)| !(**r >= 0.0 && r.is_finite())) {
                return Err(Error::NegativeParameter {
                    what: "target_rate",
                    index,
                    value,
                });
            }
        }
        match self.exploration {
            Exploration::Off => {}
            Exploration::InverseGap { gamma0, h_override, .. } => {
                if !(gamma0 >= 0.0 && gamma0.is_finite()) {
                    return Err(Error::NegativeParameter {
                        what: "gamma0",
                        index: 0,
                        value: gamma0,
                    });
                }
                if let Some(h) = h_override {
                    if h < catalog.num_items() {
                        return Err(Error::InvalidH {
                            h,
                            items: catalog.num_items(),
                        });
                    }
                }
            }
            Exploration::EpsilonGreedy { epsilon } => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Error::RateOutOfRange {
                        what: "epsilon",
                        index: 0,
                        value: epsilon,
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn default_eta(horizon: u64) -> f64 {
    1.0 / libm::sqrt(horizon.max(1) as f64)
}

/// Everything that happened in one round. Slices borrow engine buffers.
#[derive(Debug)]
pub struct RoundRecord<'a> {
    pub round: u64,
    pub predicted: &'a [f64],
    pub scores: &'a ScoreBoard,
    /// Present for inverse-gap exploration.
    pub distribution: Option<&'a SelectionDistribution>,
    pub displayed: ItemRef,
    pub explored: bool,
    pub event: &'a OutcomeEvent,
    pub lambda_before: &'a [f64],
    pub lambda_after: &'a [f64],
}

/// Per-round hook for traces and invariant checks.
pub trait RoundObserver {
    fn on_round(&mut self, record: &RoundRecord<'_>);
}

impl RoundObserver for () {
    fn on_round(&mut self, _record: &RoundRecord<'_>) {}
}

impl<F: FnMut(&RoundRecord<'_>)> RoundObserver for F {
    fn on_round(&mut self, record: &RoundRecord<'_>) {
        self(record)
    }
}

/// Random streams of an episode: one for item selection, one for outcomes.
pub fn episode_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut select = ChaCha8Rng::seed_from_u64(seed);
    select.set_stream(0);
    let mut outcome = ChaCha8Rng::seed_from_u64(seed);
    outcome.set_stream(1);
    (select, outcome)
}

/// Runs `config.horizon` rounds against `env`.
pub fn run_episode<E, O>(
    config: &EngineConfig,
    env: &Environment,
    estimator: &mut E,
    observer: &mut O,
) -> Result<RunMetrics>
where
    E: Estimator + ?Sized,
    O: RoundObserver + ?Sized,
{
    let catalog = env.catalog();
    config.validate(catalog)?;
    let spec = &config.regularizer;
    let basis = spec.outcome_basis;
    let m = catalog.num_sellers();
    let items = catalog.num_items();
    let boxes = regularizer::dual_box(spec);
    let targets = config.targets();
    let learned = env.target_rates(basis);
    let purchase = env.purchase_rates();

    let (mut select_rng, mut outcome_rng) = episode_rngs(config.seed);
    let mut lambda = DualState::zeros(m);
    let mut lambda_before = vec![0.0; m];
    let mut board = ScoreBoard::default();
    let mut dist = SelectionDistribution::default();
    let mut metrics = MetricsBuilder::new(m, config.seed, basis);

    for t in 1..=config.horizon {
        let chat = estimator.predict(&Context { round: t }, catalog)?;
        rank_scores_into(&mut board, catalog, lambda.as_slice(), chat, basis);

        let (index, explored, has_dist) = match config.exploration {
            Exploration::Off => (board.best, false, false),
            Exploration::InverseGap {
                gamma0,
                schedule,
                h_override,
            } => {
                let h = h_override.unwrap_or(items);
                selection_distribution_into(&mut dist, &board, h, schedule.gamma(gamma0, t))?;
                let i = select(&dist, &mut select_rng);
                (i, i != board.best, true)
            }
            Exploration::EpsilonGreedy { epsilon } => {
                if select_rng.random::<f64>() < epsilon {
                    (select_rng.random_range(0..items), true, false)
                } else {
                    (board.best, false, false)
                }
            }
        };

        let event = env.sample_at(index, t, &mut outcome_rng);
        let shown_seller = event.displayed.seller;
        let outcome = event.outcome(basis);
        lambda_before.copy_from_slice(lambda.as_slice());
        for (j, l) in lambda.as_mut_slice().iter_mut().enumerate() {
            let o = if j == shown_seller { outcome } else { 0.0 };
            *l = step_one(*l, config.eta, o, targets[j], boxes[j]);
        }

        let price = catalog.prices()[index];
        metrics.record(
            &event,
            price,
            learned[index],
            purchase[index],
            env.expected_outcome(index, basis),
            explored,
            lambda.as_slice(),
        );
        observer.on_round(&RoundRecord {
            round: t,
            predicted: chat,
            scores: &board,
            distribution: has_dist.then_some(&dist),
            displayed: event.displayed,
            explored,
            event: &event,
            lambda_before: &lambda_before,
            lambda_after: lambda.as_slice(),
        });
        estimator.observe(&event, catalog);
    }
    Ok(metrics.finish(spec, lambda.as_slice()))
}
