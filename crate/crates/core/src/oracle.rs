//! Full-information hindsight benchmarks.
//!
//! A [`HindsightInstance`] fixes the expected outcome rate of every item in
//! every round. Rounds that share the same rates are stored once as a
//! [`RateBlock`], so a stationary market of any horizon is a single block.
//!
//! The primal value of a per-round assignment is
//! `Σ_t p·c·x + r(a)` with `a_j = Σ_t w·c·x` over seller `j`'s items, where
//! `w = p` for the revenue basis and `1` otherwise.
//!
//! The dual of the above-target problem is
//! `min_{0 ≤ λ ≤ β} Σ_t max_i (p_i + λ_j w_i)·c_ti − Σ_j α_j λ_j + Σ_j β_j α_j`.
//! The constant `Σ β_j α_j` comes from writing
//! `β min(a, α) = β α + min_{0 ≤ λ ≤ β} λ (a − α)`; without it the dual
//! would not bound the primal. For max-min the multipliers live on the
//! scaled simplex `{μ ≥ 0, Σ μ = β}` and there is no constant.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{self, Catalog, ItemRef, OutcomeBasis, RegularizerKind, RegularizerSpec};
use crate::error::{Error, Result};
use crate::regularizer;

/// Enumeration limit for [`brute_force_opt`].
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// `rounds` consecutive rounds sharing the per-item rates `rates` (flat index).
#[derive(Debug, Clone, PartialEq)]
pub struct RateBlock {
    pub rounds: u64,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HindsightInstance {
    catalog: Catalog,
    spec: RegularizerSpec,
    blocks: Vec<RateBlock>,
    horizon: u64,
    weights: Vec<f64>,
}

impl HindsightInstance {
    pub fn new(catalog: Catalog, spec: RegularizerSpec, blocks: Vec<RateBlock>) -> Result<Self> {
        domain::validate(&catalog, &spec)?;
        let items = catalog.num_items();
        for block in &blocks {
            if block.rates.len() != items {
                return Err(Error::DimensionMismatch {
                    what: "rates",
                    expected: items,
                    got: block.rates.len(),
                });
            }
            if let Some((index, &value)) = block.rates.iter().enumerate().find(|(_, c)| !(0.0..=1.0).contains(*c)) {
                return Err(Error::RateOutOfRange {
                    what: "rates",
                    index,
                    value,
                });
            }
        }
        let horizon = blocks.iter().map(|b| b.rounds).sum();
        let weights = catalog
            .prices()
            .iter()
            .map(|&p| match spec.outcome_basis {
                OutcomeBasis::Revenue => p,
                OutcomeBasis::Click | OutcomeBasis::Purchase => 1.0,
            })
            .collect();
        Ok(Self {
            catalog,
            spec,
            blocks,
            horizon,
            weights,
        })
    }

    /// Same rates in all `horizon` rounds.
    pub fn stationary(catalog: Catalog, spec: RegularizerSpec, horizon: u64, rates: Vec<f64>) -> Result<Self> {
        Self::new(catalog, spec, vec![RateBlock { rounds: horizon, rates }])
    }

    /// One rate vector per round.
    pub fn per_round(catalog: Catalog, spec: RegularizerSpec, rates: Vec<Vec<f64>>) -> Result<Self> {
        let blocks = rates.into_iter().map(|rates| RateBlock { rounds: 1, rates }).collect();
        Self::new(catalog, spec, blocks)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn spec(&self) -> &RegularizerSpec {
        &self.spec
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn blocks(&self) -> &[RateBlock] {
        &self.blocks
    }

    fn value_of_flat<I: IntoIterator<Item = (usize, u64, usize)>>(&self, picks: I) -> f64 {
        // (block, multiplicity, item)
        let prices = self.catalog.prices();
        let mut gmv = 0.0;
        let mut aggregate = vec![0.0; self.catalog.num_sellers()];
        for (block, count, item) in picks {
            let c = self.blocks[block].rates[item];
            let n = count as f64;
            gmv += n * prices[item] * c;
            aggregate[self.catalog.seller_of(item)] += n * self.weights[item] * c;
        }
        gmv + regularizer::value(&aggregate, &self.spec)
    }
}

/// Primal objective of displaying `assignment[t]` in round `t`.
pub fn primal_value(instance: &HindsightInstance, assignment: &[ItemRef]) -> Result<f64> {
    if assignment.len() as u64 != instance.horizon {
        return Err(Error::DimensionMismatch {
            what: "assignment",
            expected: instance.horizon as usize,
            got: assignment.len(),
        });
    }
    let catalog = &instance.catalog;
    if let Some(bad) = assignment.iter().position(|item| !catalog.contains(*item)) {
        return Err(Error::InvalidConfig(alloc::format!(
            "assignment[{bad}] = {:?} is not in the catalog",
            assignment[bad]
        )));
    }
    let mut picks = Vec::with_capacity(assignment.len());
    let mut t = 0usize;
    for (b, block) in instance.blocks.iter().enumerate() {
        for _ in 0..block.rounds {
            picks.push((b, 1, catalog.index_of(assignment[t])));
            t += 1;
        }
    }
    Ok(instance.value_of_flat(picks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HindsightSolution {
    /// Primal objective of `assignment`.
    pub objective: f64,
    /// Item displayed in each round.
    pub assignment: Vec<ItemRef>,
    /// Dual prices (best iterate) when produced by the dual solver.
    pub lambda: Option<Vec<f64>>,
    /// Best dual objective found; an upper bound on the relaxed primal optimum.
    pub dual_value: Option<f64>,
    /// Best-so-far dual objective per iteration.
    pub dual_trace: Vec<f64>,
}

/// Exhaustive search over all `H^T` per-round assignments.
pub fn brute_force_opt(instance: &HindsightInstance) -> Result<HindsightSolution> {
    let items = instance.catalog.num_items();
    let rounds = instance.horizon;
    let too_large = Error::TooLarge {
        items,
        rounds,
        limit: BRUTE_FORCE_LIMIT,
    };
    let exponent = u32::try_from(rounds).map_err(|_| too_large.clone())?;
    match (items as u64).checked_pow(exponent) {
        Some(n) if n <= BRUTE_FORCE_LIMIT => {}
        _ => return Err(too_large),
    }

    let round_block: Vec<usize> = instance
        .blocks
        .iter()
        .enumerate()
        .flat_map(|(b, block)| core::iter::repeat_n(b, block.rounds as usize))
        .collect();
    let t_len = rounds as usize;
    let mut current = vec![0usize; t_len];
    let mut best = current.clone();
    let mut best_value = f64::NEG_INFINITY;
    loop {
        let value = instance.value_of_flat((0..t_len).map(|t| (round_block[t], 1, current[t])));
        if value > best_value {
            best_value = value;
            best.copy_from_slice(&current);
        }
        // Odometer increment, last round fastest.
        let mut pos = t_len;
        loop {
            if pos == 0 {
                let assignment = best.iter().map(|&i| instance.catalog.item_at(i)).collect();
                return Ok(HindsightSolution {
                    objective: best_value,
                    assignment,
                    lambda: None,
                    dual_value: None,
                    dual_trace: Vec::new(),
                });
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < items {
                break;
            }
            current[pos] = 0;
        }
    }
}

/// Iteration budget and step scale of [`dual_solve_offline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolverOptions {
    pub iterations: usize,
    /// `D` in the step `D / sqrt(i)`; defaults to `max_j β_j`.
    pub step_scale: Option<f64>,
}

impl Default for DualSolverOptions {
    fn default() -> Self {
        Self {
            iterations: 5_000,
            step_scale: None,
        }
    }
}

/// Per-round best item under dual prices `lambda`, per block.
fn inner_argmax(instance: &HindsightInstance, lambda: &[f64]) -> Vec<usize> {
    let prices = instance.catalog.prices();
    let owners = instance.catalog.owners();
    instance
        .blocks
        .iter()
        .map(|block| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, &c) in block.rates.iter().enumerate() {
                let score = (prices[i] + lambda[owners[i]] * instance.weights[i]) * c;
                if score > best_score {
                    best_score = score;
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Dual objective at `lambda`. `lambda` must lie in the dual domain
/// (box for above-target, scaled simplex for max-min, zero for none).
pub fn dual_objective(instance: &HindsightInstance, lambda: &[f64]) -> f64 {
    let prices = instance.catalog.prices();
    let owners = instance.catalog.owners();
    let spec = &instance.spec;
    let picks = inner_argmax(instance, lambda);
    let mut value = 0.0;
    for (block, &i) in instance.blocks.iter().zip(&picks) {
        value += block.rounds as f64 * (prices[i] + lambda[owners[i]] * instance.weights[i]) * block.rates[i];
    }
    if spec.kind == RegularizerKind::AboveTarget {
        for ((beta, alpha), l) in spec.beta.iter().zip(&spec.alpha).zip(lambda) {
            value += (beta - l) * alpha;
        }
    }
    value
}

/// Euclidean projection onto `{μ ≥ 0, Σ μ = total}`.
fn project_simplex(v: &mut [f64], total: f64) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - total) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn project(instance: &HindsightInstance, lambda: &mut [f64], boxes: &[(f64, f64)]) {
    match instance.spec.kind {
        RegularizerKind::MaxMin => project_simplex(lambda, instance.spec.beta[0]),
        _ => {
            for (l, &(lo, hi)) in lambda.iter_mut().zip(boxes) {
                *l = l.clamp(lo, hi);
            }
        }
    }
}

/// Projected subgradient descent on the hindsight dual.
///
/// Works on the per-round average dual so the step `D / sqrt(i)` is
/// independent of the horizon. Reports the best dual value seen (scaled
/// back to the full horizon), its multipliers, and the primal value of the
/// assignment induced by the final multipliers.
pub fn dual_solve_offline(instance: &HindsightInstance, options: DualSolverOptions) -> Result<HindsightSolution> {
    if options.iterations == 0 {
        return Err(Error::InvalidConfig("dual solver needs at least one iteration".into()));
    }
    let spec = &instance.spec;
    let m = spec.num_sellers();
    let boxes = regularizer::dual_box(spec);
    let scale = options.step_scale.unwrap_or_else(|| spec.max_beta());
    let horizon = instance.horizon.max(1) as f64;
    let owners = instance.catalog.owners();

    let mut lambda = vec![0.0; m];
    if spec.kind == RegularizerKind::MaxMin {
        lambda.fill(spec.beta[0] / m as f64);
    }
    let mut best_value = f64::INFINITY;
    let mut best_lambda = lambda.clone();
    let mut trace = Vec::with_capacity(options.iterations);
    let mut grad = vec![0.0; m];
    let domain_is_point = spec.max_beta() == 0.0;

    for i in 1..=options.iterations {
        let value = dual_objective(instance, &lambda);
        if value < best_value {
            best_value = value;
            best_lambda.copy_from_slice(&lambda);
        }
        trace.push(best_value);
        if domain_is_point {
            continue;
        }
        grad.fill(0.0);
        for (block, &item) in instance.blocks.iter().zip(&inner_argmax(instance, &lambda)) {
            grad[owners[item]] += block.rounds as f64 * instance.weights[item] * block.rates[item];
        }
        if spec.kind == RegularizerKind::AboveTarget {
            for (g, alpha) in grad.iter_mut().zip(&spec.alpha) {
                *g -= alpha;
            }
        }
        let step = scale / libm::sqrt(i as f64);
        for (l, g) in lambda.iter_mut().zip(&grad) {
            *l -= step * g / horizon;
        }
        project(instance, &mut lambda, &boxes);
    }

    // Induced assignment of the final iterate.
    let picks = inner_argmax(instance, &lambda);
    let objective = instance.value_of_flat(
        instance
            .blocks
            .iter()
            .enumerate()
            .map(|(b, block)| (b, block.rounds, picks[b])),
    );
    let mut assignment = Vec::with_capacity(instance.horizon as usize);
    for (block, &item) in instance.blocks.iter().zip(&picks) {
        for _ in 0..block.rounds {
            assignment.push(instance.catalog.item_at(item));
        }
    }
    Ok(HindsightSolution {
        objective,
        assignment,
        lambda: Some(best_lambda),
        dual_value: Some(best_value),
        dual_trace: trace,
    })
}

/// Average per-round regret of `realized` against `hindsight` over `horizon` rounds.
pub fn regret(realized: f64, hindsight: f64, horizon: u64) -> f64 {
    if horizon == 0 {
        0.0
    } else {
        (hindsight - realized) / horizon as f64
    }
}
