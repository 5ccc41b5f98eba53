use sellerfair::evs::{self, IngestOptions, SyntheticLogSpec};
use sellerfair::export;
use sellerfair::sweep::{self, SweepPlan, SweepRuns};
use sellerfair_core::engine::{GammaSchedule, RoundRecord};
use sellerfair_core::environment::build_synth;
use sellerfair_core::{
    run_episode, Catalog, EngineConfig, Environment, EstimatorConfig, Exploration, OutcomeBasis, RegularizerSpec,
    SynthSpec,
};

fn three_items() -> Environment {
    Environment::with_conversion_rates(Catalog::single_item(&[1.0, 2.0, 3.0]).unwrap(), vec![0.3, 0.2, 0.1]).unwrap()
}

fn explored_fraction(epsilon: f64, horizon: u64) -> (f64, Vec<u64>) {
    let env = three_items();
    let spec = RegularizerSpec::above_target(OutcomeBasis::Purchase, vec![1.0; 3], vec![1.0; 3]);
    let config = EngineConfig::new(horizon, 5, spec);
    let metrics = sweep::run_benchmark(&config, &env, &EstimatorConfig::oracle(), epsilon).unwrap();
    (metrics.explored_rounds as f64 / horizon as f64, metrics.displays)
}

#[test]
fn benchmark_exploration_rate() {
    let (fraction, _) = explored_fraction(0.1, 100_000);
    assert!(
        (fraction - 0.1).abs() <= 3.0 * (0.1f64 * 0.9 / 100_000.0).sqrt(),
        "{fraction}"
    );

    // ε = 0 with true rates always shows argmax p·c (item 1: 0.4).
    let (fraction, displays) = explored_fraction(0.0, 1000);
    assert_eq!(fraction, 0.0);
    assert_eq!(displays, vec![0, 1000, 0]);

    let (fraction, displays) = explored_fraction(1.0, 30_000);
    assert_eq!(fraction, 1.0);
    assert!(displays
        .iter()
        .all(|&d| (d as f64 - 10_000.0).abs() < 3.0 * (30_000.0f64 * 2.0 / 9.0).sqrt()));
}

#[test]
fn benchmark_never_moves_dual_prices() {
    let env = three_items();
    let spec = RegularizerSpec::above_target(OutcomeBasis::Purchase, vec![100.0; 3], vec![5.0; 3]);
    let config = sweep::benchmark_config(&EngineConfig::new(2000, 1, spec), 0.05);
    let mut est = EstimatorConfig::default().build(&env, OutcomeBasis::Purchase).unwrap();
    let mut max = 0.0f64;
    let mut check = |r: &RoundRecord<'_>| max = r.lambda_after.iter().fold(max, |a, &b| a.max(b));
    let metrics = run_episode(&config, &env, &mut est, &mut check).unwrap();
    assert_eq!(max, 0.0);
    assert_eq!(metrics.objective, metrics.gmv);
}

fn synthetic_plan(seed: u64) -> (Environment, SweepPlan) {
    let env = build_synth(&SynthSpec {
        seed: 1000 + seed,
        ..SynthSpec::default()
    })
    .unwrap();
    let m = env.catalog().num_sellers();
    let base = EngineConfig::new(
        200_000,
        seed,
        RegularizerSpec::above_target(OutcomeBasis::Click, vec![5.0; m], vec![0.0; m]),
    )
    .with_eta(1.0)
    .with_exploration(Exploration::InverseGap {
        gamma0: 300.0,
        schedule: GammaSchedule::Sqrt,
        h_override: None,
    });
    let plan = SweepPlan {
        base,
        estimator: EstimatorConfig::default(),
        multipliers: vec![0.0, 1.0],
        seeds: vec![seed],
        benchmark_epsilon: 0.05,
    };
    (env, plan)
}

#[test]
fn fairness_weight_raises_sellers_at_target() {
    let mut at = [0.0; 2];
    for seed in 0..5 {
        let (env, plan) = synthetic_plan(seed);
        let runs = sweep::run_sweep(&plan, &env).unwrap();
        for (k, r) in runs.runs.iter().enumerate() {
            at[k] += r.metrics.sellers_at_target as f64 / 5.0;
        }
    }
    assert!(at[1] > at[0], "{at:?}");
}

fn evs_runs() -> SweepRuns {
    let mut log = Vec::new();
    evs::write_synthetic_log(&SyntheticLogSpec::default(), &mut log).unwrap();
    let table = evs::ingest_evs(log.as_slice(), IngestOptions::default()).unwrap().table;
    let env = table.to_environment(true).unwrap();
    let m = env.catalog().num_sellers();
    let base = EngineConfig::new(
        200_000,
        0,
        RegularizerSpec::above_target(OutcomeBasis::Purchase, vec![5.0; m], vec![0.0; m]),
    )
    .with_eta(10.0);
    let plan = SweepPlan {
        base,
        estimator: EstimatorConfig::default(),
        multipliers: vec![1.0],
        seeds: (0..3).collect(),
        benchmark_epsilon: 0.05,
    };
    sweep::run_sweep(&plan, &env).unwrap()
}

#[test]
fn evs_histograms_shift_towards_target() {
    let runs = evs_runs();
    let edges = [0.0, 5.0];
    let bench: Vec<_> = runs.benchmark.iter().collect();
    let bench = sweep::export_histogram(&bench, &edges);
    let alg = sweep::export_histogram(&runs.metrics_at(1.0), &edges);
    // The overflow bin counts sellers with at least α = 5 clicks.
    assert!(alg[1].count > bench[1].count, "{alg:?} vs {bench:?}");
    assert_eq!(alg[0].count + alg[1].count, bench[0].count + bench[1].count);

    let report = sweep::aggregate(&runs);
    let text = serde_json::to_string(&runs).unwrap();
    let reloaded: SweepRuns = serde_json::from_str(&text).unwrap();
    assert_eq!(sweep::aggregate(&reloaded), report);
}

#[test]
fn exports_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str| {
        let (env, mut plan) = synthetic_plan(2);
        plan.base.horizon = 20_000;
        let runs = sweep::run_sweep(&plan, &env).unwrap();
        let path = dir.path().join(name);
        export::write_json(&sweep::aggregate(&runs), &path).unwrap();
        let hist = dir.path().join(format!("hist_{name}.csv"));
        let bins = sweep::export_histogram(&runs.metrics_at(1.0), &[0.0, 1.0, 5.0, 20.0]);
        export::write_file(&hist, |w| export::write_histogram_csv(&bins, w)).unwrap();
        (std::fs::read(path).unwrap(), std::fs::read(hist).unwrap())
    };
    assert_eq!(write("a.json"), write("b.json"));
}
