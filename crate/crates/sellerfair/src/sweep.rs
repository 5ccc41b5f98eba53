//! β/price sweeps against the ε-greedy benchmark, and their aggregation.

use rayon::prelude::*;
use sellerfair_core::{
    run_episode, Catalog, EngineConfig, Environment, EstimatorConfig, Exploration, OutcomeBasis, RegularizerKind,
    RegularizerSpec, RunMetrics,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `β_j = multiplier × mean item price of seller j`.
pub fn multiplier_beta(catalog: &Catalog, multiplier: f64) -> Result<Vec<f64>> {
    if !(multiplier >= 0.0 && multiplier.is_finite()) {
        return Err(Error::Config(format!(
            "beta multiplier must be nonnegative, got {multiplier}"
        )));
    }
    Ok((0..catalog.num_sellers())
        .map(|j| multiplier * catalog.mean_price(j))
        .collect())
}

/// One above-target spec per multiplier.
pub fn beta_multipliers_to_spec(
    catalog: &Catalog,
    multipliers: &[f64],
    alpha: &[f64],
    outcome_basis: OutcomeBasis,
) -> Result<Vec<RegularizerSpec>> {
    multipliers
        .iter()
        .map(|&mult| {
            let spec = RegularizerSpec::above_target(outcome_basis, alpha.to_vec(), multiplier_beta(catalog, mult)?);
            sellerfair_core::domain::validate(catalog, &spec)?;
            Ok(spec)
        })
        .collect()
}

/// ε-greedy on `p·ĉ` without a fairness term: the engine with `β = 0` and
/// ε-greedy exploration. α is kept so sellers-at-target stays comparable.
pub fn run_benchmark(
    config: &EngineConfig,
    env: &Environment,
    estimator: &EstimatorConfig,
    epsilon: f64,
) -> Result<RunMetrics> {
    let config = benchmark_config(config, epsilon);
    let mut est = estimator.build(env, config.regularizer.outcome_basis)?;
    Ok(run_episode(&config, env, &mut est, &mut ())?)
}

pub fn benchmark_config(config: &EngineConfig, epsilon: f64) -> EngineConfig {
    let m = config.regularizer.num_sellers();
    let regularizer = RegularizerSpec {
        kind: match config.regularizer.kind {
            RegularizerKind::None => RegularizerKind::None,
            _ => RegularizerKind::AboveTarget,
        },
        beta: vec![0.0; m],
        ..config.regularizer.clone()
    };
    EngineConfig {
        regularizer,
        exploration: Exploration::EpsilonGreedy { epsilon },
        ..config.clone()
    }
}

/// A β/price grid over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Horizon, η, exploration, α and outcome basis; β is replaced per point.
    pub base: EngineConfig,
    pub estimator: EstimatorConfig,
    pub multipliers: Vec<f64>,
    pub seeds: Vec<u64>,
    pub benchmark_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub multiplier: f64,
    pub metrics: RunMetrics,
}

/// Raw metrics behind a [`SweepReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRuns {
    pub benchmark_epsilon: f64,
    pub multipliers: Vec<f64>,
    pub seeds: Vec<u64>,
    /// One per seed, in seed order.
    pub benchmark: Vec<RunMetrics>,
    /// Multiplier-major, seed-minor.
    pub runs: Vec<SweepRun>,
}

impl SweepRuns {
    pub fn metrics_at(&self, multiplier: f64) -> Vec<&RunMetrics> {
        self.runs
            .iter()
            .filter(|r| r.multiplier == multiplier)
            .map(|r| &r.metrics)
            .collect()
    }
}

/// Runs every (multiplier, seed) pair and one benchmark per seed, in parallel.
/// Runs for the same seed share the selection and outcome streams.
pub fn run_sweep(plan: &SweepPlan, env: &Environment) -> Result<SweepRuns> {
    if plan.seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let specs = beta_multipliers_to_spec(
        env.catalog(),
        &plan.multipliers,
        &plan.base.regularizer.alpha,
        plan.base.regularizer.outcome_basis,
    )?;
    let jobs: Vec<(Option<usize>, u64)> = (0..specs.len())
        .map(Some)
        .chain([None])
        .flat_map(|point| plan.seeds.iter().map(move |&seed| (point, seed)))
        .collect();
    let mut results = jobs
        .par_iter()
        .map(|&(point, seed)| {
            let config = match point {
                Some(p) => EngineConfig {
                    seed,
                    regularizer: specs[p].clone(),
                    ..plan.base.clone()
                },
                None => benchmark_config(
                    &EngineConfig {
                        seed,
                        ..plan.base.clone()
                    },
                    plan.benchmark_epsilon,
                ),
            };
            let mut est = plan.estimator.build(env, config.regularizer.outcome_basis)?;
            Ok(run_episode(&config, env, &mut est, &mut ())?)
        })
        .collect::<Result<Vec<RunMetrics>>>()?;
    let benchmark = results.split_off(specs.len() * plan.seeds.len());
    let runs = results
        .into_iter()
        .enumerate()
        .map(|(i, metrics)| SweepRun {
            multiplier: plan.multipliers[i / plan.seeds.len()],
            metrics,
        })
        .collect();
    Ok(SweepRuns {
        benchmark_epsilon: plan.benchmark_epsilon,
        multipliers: plan.multipliers.clone(),
        seeds: plan.seeds.clone(),
        benchmark,
        runs,
    })
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStderr {
    /// Non-finite samples (e.g. a relative change against zero) are left out.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub multiplier: f64,
    pub gmv: MeanStderr,
    /// `(GMV_alg − GMV_bench) / GMV_bench`, paired by seed.
    pub gmv_change_vs_benchmark: MeanStderr,
    /// Same, against multiplier 0 when it is part of the sweep.
    pub gmv_change_vs_zero: Option<MeanStderr>,
    pub sellers_at_target: MeanStderr,
    /// Mean sellers-at-target over the benchmark's mean.
    pub sellers_at_target_ratio: f64,
    pub objective: MeanStderr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub baseline: String,
    pub seeds: Vec<u64>,
    pub benchmark_gmv: MeanStderr,
    pub benchmark_sellers_at_target: MeanStderr,
    pub benchmark_objective: MeanStderr,
    pub points: Vec<SweepPoint>,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b) / b
}

/// Pure reduction of [`SweepRuns`]; re-aggregating gives the same report.
pub fn aggregate(runs: &SweepRuns) -> SweepReport {
    let bench = &runs.benchmark;
    let zero = runs.multipliers.contains(&0.0).then(|| runs.metrics_at(0.0));
    let bench_sat = MeanStderr::of(bench.iter().map(|m| m.sellers_at_target as f64));
    let points = runs
        .multipliers
        .iter()
        .map(|&mult| {
            let at = runs.metrics_at(mult);
            let sat = MeanStderr::of(at.iter().map(|m| m.sellers_at_target as f64));
            SweepPoint {
                multiplier: mult,
                gmv: MeanStderr::of(at.iter().map(|m| m.gmv)),
                gmv_change_vs_benchmark: MeanStderr::of(at.iter().zip(bench).map(|(a, b)| relative(a.gmv, b.gmv))),
                gmv_change_vs_zero: zero
                    .as_ref()
                    .map(|z| MeanStderr::of(at.iter().zip(z).map(|(a, b)| relative(a.gmv, b.gmv)))),
                sellers_at_target: sat,
                sellers_at_target_ratio: sat.mean / bench_sat.mean,
                objective: MeanStderr::of(at.iter().map(|m| m.objective)),
            }
        })
        .collect();
    SweepReport {
        baseline: format!(
            "epsilon-greedy benchmark (epsilon = {}, beta = 0)",
            runs.benchmark_epsilon
        ),
        seeds: runs.seeds.clone(),
        benchmark_gmv: MeanStderr::of(bench.iter().map(|m| m.gmv)),
        benchmark_sellers_at_target: bench_sat,
        benchmark_objective: MeanStderr::of(bench.iter().map(|m| m.objective)),
        points,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    /// `None` for the overflow bin.
    pub upper: Option<f64>,
    pub count: u64,
}

/// Per-seller click counts binned into `[e_i, e_{i+1})`, plus an overflow bin
/// `[e_last, ∞)`. Counts below the first edge are dropped.
pub fn export_histogram(metrics: &[&RunMetrics], edges: &[f64]) -> Vec<HistogramBin> {
    let mut bins: Vec<HistogramBin> = edges
        .iter()
        .enumerate()
        .map(|(i, &lower)| HistogramBin {
            lower,
            upper: edges.get(i + 1).copied(),
            count: 0,
        })
        .collect();
    for m in metrics {
        for &clicks in &m.clicks {
            let x = clicks as f64;
            if let Some(bin) = bins.iter_mut().find(|b| x >= b.lower && b.upper.is_none_or(|u| x < u)) {
                bin.count += 1;
            }
        }
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use sellerfair_core::engine::GammaSchedule;

    fn fake(clicks: Vec<u64>, gmv: f64, sat: usize) -> RunMetrics {
        let m = clicks.len();
        RunMetrics {
            seed: 0,
            rounds: 0,
            gmv,
            objective: gmv,
            primal_objective: 0.0,
            expected_gmv: 0.0,
            displays: vec![0; m],
            clicks,
            purchases: vec![0; m],
            revenue: vec![0.0; m],
            aggregate: vec![0.0; m],
            sellers_at_target: sat,
            explored_rounds: 0,
            lambda_final: vec![0.0; m],
            lambda_mean: vec![0.0; m],
            lambda_max: vec![0.0; m],
        }
    }

    #[test]
    fn beta_from_mean_price() {
        let catalog = Catalog::new(vec![vec![2.0, 4.0], vec![1.0]]).unwrap();
        let specs = beta_multipliers_to_spec(&catalog, &[0.5, 0.0], &[1.0, 1.0], OutcomeBasis::Click).unwrap();
        assert_eq!(specs[0].beta, vec![1.5, 0.5]);
        assert_eq!(specs[1].beta, vec![0.0, 0.0]);
        let five = beta_multipliers_to_spec(&catalog, &[0.1, 0.2, 0.5, 1.0, 2.0], &[1.0, 1.0], OutcomeBasis::Click);
        assert_eq!(five.unwrap().len(), 5);
        assert!(beta_multipliers_to_spec(&catalog, &[-1.0], &[1.0, 1.0], OutcomeBasis::Click).is_err());
    }

    #[test]
    fn histogram_bins() {
        let one = fake(vec![7], 0.0, 0);
        let bins = export_histogram(&[&one], &[0.0, 5.0, 10.0]);
        let counts: Vec<u64> = bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![0, 1, 0]);
        assert_eq!(bins[2].upper, None);
        let empty = export_histogram(&[], &[0.0, 5.0, 10.0]);
        assert!(empty.iter().all(|b| b.count == 0));
        let edges = fake(vec![0, 5, 10, 99], 0.0, 0);
        let counts: Vec<u64> = export_histogram(&[&edges], &[0.0, 5.0, 10.0])
            .iter()
            .map(|b| b.count)
            .collect();
        assert_eq!(counts, vec![1, 1, 2]);
    }

    #[test]
    fn mean_stderr() {
        let s = MeanStderr::of([1.0, 2.0, 3.0, f64::INFINITY]);
        assert_eq!(s.n, 3);
        assert_eq!(s.mean, 2.0);
        assert!((s.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStderr::of([4.0]).stderr, 0.0);
    }

    #[test]
    fn aggregate_pairs_by_seed() {
        let runs = SweepRuns {
            benchmark_epsilon: 0.05,
            multipliers: vec![0.0, 1.0],
            seeds: vec![0, 1],
            benchmark: vec![fake(vec![], 100.0, 2), fake(vec![], 200.0, 4)],
            runs: vec![
                SweepRun {
                    multiplier: 0.0,
                    metrics: fake(vec![], 100.0, 2),
                },
                SweepRun {
                    multiplier: 0.0,
                    metrics: fake(vec![], 200.0, 4),
                },
                SweepRun {
                    multiplier: 1.0,
                    metrics: fake(vec![], 90.0, 6),
                },
                SweepRun {
                    multiplier: 1.0,
                    metrics: fake(vec![], 190.0, 6),
                },
            ],
        };
        let report = aggregate(&runs);
        assert_eq!(report.points.len(), 2);
        assert_eq!(report.points[0].gmv_change_vs_benchmark.mean, 0.0);
        let p = &report.points[1];
        assert!((p.gmv_change_vs_zero.unwrap().mean - (-0.1 - 0.05) / 2.0).abs() < 1e-15);
        assert_eq!(p.sellers_at_target.mean, 6.0);
        assert_eq!(p.sellers_at_target_ratio, 2.0);
        assert_eq!(aggregate(&runs), report);
    }

    #[test]
    fn zero_multiplier_with_benchmark_exploration_matches_benchmark() {
        let env = sellerfair_core::environment::build_synth(&sellerfair_core::SynthSpec {
            sellers: 6,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let m = env.catalog().num_sellers();
        let base = EngineConfig::new(
            2_000,
            0,
            RegularizerSpec::above_target(OutcomeBasis::Click, vec![5.0; m], vec![0.0; m]),
        )
        .with_exploration(Exploration::EpsilonGreedy { epsilon: 0.05 });
        let plan = SweepPlan {
            base,
            estimator: EstimatorConfig::default(),
            multipliers: vec![0.0],
            seeds: vec![1, 2],
            benchmark_epsilon: 0.05,
        };
        let runs = run_sweep(&plan, &env).unwrap();
        assert_eq!(runs.runs[0].metrics, runs.benchmark[0]);
        let report = aggregate(&runs);
        assert_eq!(report.points.len(), 1);
        assert_eq!(report.points[0].gmv_change_vs_benchmark.mean, 0.0);

        let inverse_gap = SweepPlan {
            base: plan.base.clone().with_exploration(Exploration::InverseGap {
                gamma0: 10.0,
                schedule: GammaSchedule::Sqrt,
                h_override: None,
            }),
            ..plan
        };
        assert_eq!(
            run_sweep(&inverse_gap, &env).unwrap(),
            run_sweep(&inverse_gap, &env).unwrap()
        );
    }
}
