use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sellerfair::config::{ExplorationKind, RunConfig, SweepConfig};
use sellerfair::evs::{self, IngestOptions, SyntheticLogSpec};
use sellerfair::export::{self, TraceRecorder};
use sellerfair::sweep::{self, SweepPlan};
use sellerfair_core::environment::calibration_report;
use sellerfair_core::oracle::{self, DualSolverOptions, HindsightInstance, BRUTE_FORCE_LIMIT};
use sellerfair_core::{run_episode, GammaSchedule, RunMetrics};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "sellerfair", version, about = "Seller-fair online allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the per-round trace.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Run a beta/price multiplier grid over seeds against the benchmark.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated beta/price multipliers.
        #[arg(long, value_delimiter = ',')]
        multipliers: Option<Vec<f64>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        benchmark_epsilon: Option<f64>,
        /// Comma-separated click-count histogram edges.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,5,10,20,50,100,200,500,1000")]
        hist_edges: Vec<f64>,
    },
    /// Aggregate an event log into brands.csv.
    IngestEvs {
        input: PathBuf,
        #[arg(long, default_value_t = evs::DEFAULT_VIEW_THRESHOLD)]
        view_threshold: u64,
        #[arg(long, short, default_value = "brands.csv")]
        out: PathBuf,
    },
    /// Write a deterministic synthetic event log.
    SynthLog {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        large_brands: usize,
        #[arg(long, default_value_t = 10)]
        small_brands: usize,
        /// Views separating large from small brands.
        #[arg(long, default_value_t = evs::DEFAULT_VIEW_THRESHOLD)]
        view_threshold: u64,
    },
    /// Solve the hindsight problem and report the regret of one episode.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 5000)]
        iterations: usize,
    },
    /// Compare sampled outcomes against the environment's true rates.
    Calibrate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
        /// Fail if any |z| exceeds this.
        #[arg(long, default_value_t = 4.0)]
        max_z: f64,
    },
}

/// Config file plus overrides of its top-level keys.
#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_parser = parse_exploration)]
    exploration: Option<ExplorationKind>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long, value_parser = parse_schedule)]
    gamma_schedule: Option<GammaSchedule>,
    #[arg(long)]
    h_override: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta_multiplier: Option<f64>,
    #[arg(long)]
    retrain_every: Option<u64>,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

fn parse_exploration(s: &str) -> Result<ExplorationKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown exploration `{s}` (off, inverse_gap, epsilon_greedy)"))
}

fn parse_schedule(s: &str) -> Result<GammaSchedule, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown schedule `{s}` (constant, sqrt, linear)"))
}

impl RunArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut c = RunConfig::from_file(&self.config)?;
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.eta.is_some() {
            c.eta = self.eta;
        }
        if let Some(v) = self.exploration {
            c.exploration = v;
        }
        if let Some(v) = self.gamma0 {
            c.gamma0 = v;
        }
        if let Some(v) = self.gamma_schedule {
            c.gamma_schedule = v;
        }
        if self.h_override.is_some() {
            c.h_override = self.h_override;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if self.beta_multiplier.is_some() {
            c.regularizer.beta_multiplier = self.beta_multiplier;
        }
        if let Some(v) = self.retrain_every {
            c.predictor.retrain_every = v;
        }
        c.check()?;
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a RunConfig,
    metrics: &'a RunMetrics,
}

fn cmd_run(args: &RunArgs, trace: bool) -> anyhow::Result<()> {
    let config = args.load()?;
    let env = config.environment.build()?;
    let engine = config.engine_config(env.catalog())?;
    let mut est = config.predictor.build(&env, engine.regularizer.outcome_basis)?;
    let mut recorder = TraceRecorder::default();
    let metrics = if trace {
        run_episode(&engine, &env, &mut est, &mut recorder)?
    } else {
        run_episode(&engine, &env, &mut est, &mut ())?
    };
    if trace {
        let path = args.out.join("trace.csv");
        export::write_file(&path, |w| recorder.write_csv(w))?;
    }
    export::write_json(
        &RunSummary {
            config: &config,
            metrics: &metrics,
        },
        &args.out.join("summary.json"),
    )?;
    println!(
        "rounds {}  gmv {:.4}  objective {:.4}  sellers at target {}/{}  explored {}",
        metrics.rounds,
        metrics.gmv,
        metrics.objective,
        metrics.sellers_at_target,
        metrics.displays.len(),
        metrics.explored_rounds
    );
    Ok(())
}

fn multiplier_label(m: f64) -> String {
    format!("m{m}").replace('.', "_")
}

fn cmd_sweep(
    args: &RunArgs,
    multipliers: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    benchmark_epsilon: Option<f64>,
    edges: &[f64],
) -> anyhow::Result<()> {
    let mut config = args.load()?;
    let defaults = config.sweep_config();
    config.sweep = Some(SweepConfig {
        multipliers: multipliers.unwrap_or(defaults.multipliers),
        seeds: seeds.unwrap_or(defaults.seeds),
        benchmark_epsilon: benchmark_epsilon.unwrap_or(defaults.benchmark_epsilon),
    });
    config.check()?;
    let sweep_cfg = config.sweep_config();
    let env = config.environment.build()?;
    let plan = SweepPlan {
        base: config.engine_config(env.catalog())?,
        estimator: config.predictor,
        multipliers: sweep_cfg.multipliers.clone(),
        seeds: sweep_cfg.seeds.clone(),
        benchmark_epsilon: sweep_cfg.benchmark_epsilon,
    };
    let runs = sweep::run_sweep(&plan, &env)?;
    let report = sweep::aggregate(&runs);
    export::write_json(&report, &args.out.join("summary.json"))?;

    let bench: Vec<&RunMetrics> = runs.benchmark.iter().collect();
    let path = args.out.join("hist_benchmark.csv");
    export::write_file(&path, |w| {
        export::write_histogram_csv(&sweep::export_histogram(&bench, edges), w)
    })?;
    for &m in &plan.multipliers {
        let path = args.out.join(format!("hist_{}.csv", multiplier_label(m)));
        let bins = sweep::export_histogram(&runs.metrics_at(m), edges);
        export::write_file(&path, |w| export::write_histogram_csv(&bins, w))?;
    }

    println!("{}", report.baseline);
    println!(
        "benchmark      gmv {:>12.4}  at target {:>6.2} ± {:.2}",
        report.benchmark_gmv.mean, report.benchmark_sellers_at_target.mean, report.benchmark_sellers_at_target.stderr
    );
    for p in &report.points {
        println!(
            "beta/p {:>6}  gmv {:>12.4}  vs bench {:>+7.2}% ± {:.2}  at target {:>6.2} ± {:.2}  ({:.2}x)",
            p.multiplier,
            p.gmv.mean,
            100.0 * p.gmv_change_vs_benchmark.mean,
            100.0 * p.gmv_change_vs_benchmark.stderr,
            p.sellers_at_target.mean,
            p.sellers_at_target.stderr,
            p.sellers_at_target_ratio
        );
    }
    Ok(())
}

fn cmd_ingest(input: &Path, view_threshold: u64, out: &Path) -> anyhow::Result<()> {
    let report = evs::ingest_evs_file(input, IngestOptions { view_threshold })?;
    export::write_file(out, |w| report.table.write_csv(w))?;
    println!(
        "{} brands kept, {} below {} views, {} malformed rows skipped",
        report.table.brands.len(),
        report.filtered_brands,
        view_threshold,
        report.skipped_rows
    );
    Ok(())
}

#[derive(Serialize)]
struct OracleSummary {
    horizon: u64,
    dual_value: f64,
    induced_primal: f64,
    brute_force: Option<f64>,
    realized_objective: f64,
    expected_objective: f64,
    realized_regret: f64,
    pseudo_regret: f64,
}

fn cmd_oracle(args: &RunArgs, iterations: usize) -> anyhow::Result<()> {
    if iterations == 0 {
        bail!("iterations must be at least 1");
    }
    let config = args.load()?;
    let env = config.environment.build()?;
    let engine = config.engine_config(env.catalog())?;
    let basis = engine.regularizer.outcome_basis;
    let instance = HindsightInstance::stationary(
        env.catalog().clone(),
        engine.regularizer.clone(),
        engine.horizon,
        env.target_rates(basis),
    )?;
    let dual = oracle::dual_solve_offline(
        &instance,
        DualSolverOptions {
            iterations,
            ..DualSolverOptions::default()
        },
    )?;
    let items = env.catalog().num_items() as f64;
    let brute_force = if items.powf(engine.horizon as f64) <= BRUTE_FORCE_LIMIT as f64 {
        Some(oracle::brute_force_opt(&instance)?.objective)
    } else {
        None
    };
    let mut est = config.predictor.build(&env, basis)?;
    let metrics = run_episode(&engine, &env, &mut est, &mut ())?;
    let hindsight = dual.dual_value.unwrap_or(dual.objective);
    let summary = OracleSummary {
        horizon: engine.horizon,
        dual_value: hindsight,
        induced_primal: dual.objective,
        brute_force,
        realized_objective: metrics.objective,
        expected_objective: metrics.primal_objective,
        realized_regret: oracle::regret(metrics.objective, hindsight, engine.horizon),
        pseudo_regret: oracle::regret(metrics.primal_objective, hindsight, engine.horizon),
    };
    export::write_json(&summary, &args.out.join("oracle.json"))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_calibrate(args: &RunArgs, draws: u64, max_z: f64) -> anyhow::Result<()> {
    let config = args.load()?;
    let env = config.environment.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rows = calibration_report(&env, draws, &mut rng)?;
    let path = args.out.join("calibration.csv");
    export::write_file(&path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "seller",
            "item",
            "true_ctr",
            "empirical_ctr",
            "ctr_z",
            "true_purchase_rate",
            "empirical_purchase_rate",
            "purchase_z",
        ])?;
        for r in &rows {
            csv.serialize((
                r.item.seller,
                r.item.item,
                r.true_ctr,
                r.empirical_ctr,
                r.ctr_z,
                r.true_purchase_rate,
                r.empirical_purchase_rate,
                r.purchase_z,
            ))?;
        }
        csv.flush().map_err(|e| sellerfair::Error::Io {
            path: path.clone(),
            source: e,
        })
    })?;
    let worst = rows
        .iter()
        .flat_map(|r| [r.ctr_z.abs(), r.purchase_z.abs()])
        .fold(0.0f64, f64::max);
    println!("{} items, {} draws each, max |z| = {:.3}", rows.len(), draws, worst);
    if worst > max_z {
        bail!("calibration failed: max |z| {worst:.3} exceeds {max_z}");
    }
    Ok(())
}

fn cmd_synth_log(out: &Path, spec: SyntheticLogSpec) -> anyhow::Result<()> {
    export::write_file(out, |w| evs::write_synthetic_log(&spec, w))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { run, trace } => cmd_run(run, *trace),
        Command::Sweep {
            run,
            multipliers,
            seeds,
            benchmark_epsilon,
            hist_edges,
        } => cmd_sweep(run, multipliers.clone(), seeds.clone(), *benchmark_epsilon, hist_edges),
        Command::IngestEvs {
            input,
            view_threshold,
            out,
        } => cmd_ingest(input, *view_threshold, out),
        Command::SynthLog {
            out,
            seed,
            large_brands,
            small_brands,
            view_threshold,
        } => cmd_synth_log(
            out,
            SyntheticLogSpec {
                seed: *seed,
                large_brands: *large_brands,
                small_brands: *small_brands,
                view_threshold: *view_threshold,
                ..SyntheticLogSpec::default()
            },
        ),
        Command::Oracle { run, iterations } => cmd_oracle(run, *iterations),
        Command::Calibrate { run, draws, max_z } => cmd_calibrate(run, *draws, *max_z),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
