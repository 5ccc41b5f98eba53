use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{OutcomeBasis, OutcomeEvent, RegularizerSpec};
use crate::regularizer;

/// Aggregates of one episode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    pub seed: u64,
    pub rounds: u64,
    /// Realized revenue of purchased displayed items.
    pub gmv: f64,
    /// `gmv + r(a)` on realized aggregates.
    pub objective: f64,
    /// `Σ p·c + r(Σ c)` over displayed items with true rates, the hindsight primal of the played sequence.
    pub primal_objective: f64,
    /// Expected revenue of the displayed items.
    pub expected_gmv: f64,
    pub displays: Vec<u64>,
    pub clicks: Vec<u64>,
    pub purchases: Vec<u64>,
    pub revenue: Vec<f64>,
    /// Realized `a_j` under the regularizer's outcome basis.
    pub aggregate: Vec<f64>,
    /// Sellers with `a_j >= α_j`.
    pub sellers_at_target: usize,
    /// Rounds in which the exploration step overrode the best-scoring item.
    pub explored_rounds: u64,
    pub lambda_final: Vec<f64>,
    pub lambda_mean: Vec<f64>,
    pub lambda_max: Vec<f64>,
}

/// Running accumulator behind [`RunMetrics`].
#[derive(Debug, Clone)]
pub(crate) struct MetricsBuilder {
    metrics: RunMetrics,
    basis: OutcomeBasis,
    expected_aggregate: Vec<f64>,
    primal_gmv: f64,
    lambda_sum: Vec<f64>,
}

impl MetricsBuilder {
    pub(crate) fn new(sellers: usize, seed: u64, basis: OutcomeBasis) -> Self {
        Self {
            metrics: RunMetrics {
                seed,
                rounds: 0,
                gmv: 0.0,
                objective: 0.0,
                primal_objective: 0.0,
                expected_gmv: 0.0,
                displays: vec![0; sellers],
                clicks: vec![0; sellers],
                purchases: vec![0; sellers],
                revenue: vec![0.0; sellers],
                aggregate: vec![0.0; sellers],
                sellers_at_target: 0,
                explored_rounds: 0,
                lambda_final: vec![0.0; sellers],
                lambda_mean: vec![0.0; sellers],
                lambda_max: vec![0.0; sellers],
            },
            basis,
            expected_aggregate: vec![0.0; sellers],
            primal_gmv: 0.0,
            lambda_sum: vec![0.0; sellers],
        }
    }

    /// Records one round. `target_rate` is the true probability of the learned
    /// event for the displayed item, `contribution` its expected `a_j` increment.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn record(
        &mut self,
        event: &OutcomeEvent,
        price: f64,
        target_rate: f64,
        purchase_rate: f64,
        contribution: f64,
        explored: bool,
        lambda: &[f64],
    ) {
        let m = &mut self.metrics;
        let j = event.displayed.seller;
        m.rounds += 1;
        m.displays[j] += 1;
        m.clicks[j] += u64::from(event.clicked);
        m.purchases[j] += u64::from(event.purchased);
        m.revenue[j] += event.revenue;
        m.gmv += event.revenue;
        m.aggregate[j] += event.outcome(self.basis);
        m.expected_gmv += price * purchase_rate;
        m.explored_rounds += u64::from(explored);
        self.primal_gmv += price * target_rate;
        self.expected_aggregate[j] += contribution;
        for (k, &l) in lambda.iter().enumerate() {
            self.lambda_sum[k] += l;
            if l > m.lambda_max[k] {
                m.lambda_max[k] = l;
            }
        }
    }

    pub(crate) fn finish(mut self, spec: &RegularizerSpec, lambda: &[f64]) -> RunMetrics {
        let m = &mut self.metrics;
        m.objective = m.gmv + regularizer::value(&m.aggregate, spec);
        m.primal_objective = self.primal_gmv + regularizer::value(&self.expected_aggregate, spec);
        m.sellers_at_target = m
            .aggregate
            .iter()
            .zip(&spec.alpha)
            .filter(|(a, alpha)| a >= alpha)
            .count();
        m.lambda_final = lambda.to_vec();
        if m.rounds > 0 {
            let t = m.rounds as f64;
            m.lambda_mean = self.lambda_sum.iter().map(|s| s / t).collect();
        }
        self.metrics
    }
}
