//! Experiment orchestration: deterministic instance construction, seeded
//! runs, bits sweeps, and CSV persistence.
//!
//! The first configured seed fixes the graph and the regression data, so an
//! experiment is a pure function of its configuration. Seeds (and bit widths
//! in a sweep) execute in parallel; output rows are assembled in
//! deterministic `(bits, seed)` order regardless of completion order, which
//! keeps the emitted CSV byte-identical across thread counts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::algorithm::{
    default_checkpoints, gaps, quantized_step, run, update_running_average, Mode, NetworkState,
    RunOutput, StepSchedule,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::graph::{lazy_metropolis, MixingMatrix, Network};
use crate::metrics::{bound_convex, bound_strongly_convex, BoundInputs, MetricRow, CSV_HEADER};
use crate::problems::{LossKind, ProblemInstance, ReferenceSolution};
use crate::quantizer::BoxDomain;
use crate::rng::{CounterRng, Purpose, RunRng};

/// Sentinel recorded when a sweep run never crosses the threshold.
pub const NO_CROSSING: i64 = -1;

// ---------------------------------------------------------------------------
// Instance construction
// ---------------------------------------------------------------------------

/// Graph, mixing weights, and problem, all derived from the first seed.
pub struct Instance {
    pub network: Network,
    pub mixing: MixingMatrix,
    pub problem: ProblemInstance,
}

pub fn build_network(config: &ExperimentConfig, seed: u64) -> Result<Network> {
    let mut rng = CounterRng::from_parts(seed, 0, 0, Purpose::GraphCoordinates);
    Network::generate_rgg(config.n, config.radius, &mut rng, config.max_attempts)
}

pub fn build_instance(config: &ExperimentConfig, bits: u32) -> Result<Instance> {
    let seed = config.seeds[0];
    let network = build_network(config, seed)?;
    let mixing = lazy_metropolis(&network);
    let domain = BoxDomain::uniform(config.box_lower, config.box_upper, bits, config.d)?;
    let problem = ProblemInstance::generate(
        config.n,
        config.loss_kind,
        config.points_per_node(),
        domain,
        seed,
    )?;
    Ok(Instance {
        network,
        mixing,
        problem,
    })
}

fn loss_name(loss: LossKind) -> &'static str {
    match loss {
        LossKind::Quadratic => "quadratic",
        LossKind::Absolute => "absolute",
    }
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(count) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(count)
                .build()
                .map_err(|e| Error::Config(format!("threads: cannot build pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

// ---------------------------------------------------------------------------
// graph
// ---------------------------------------------------------------------------

/// What `cmd_graph` reports.
#[derive(Debug, Clone)]
pub struct GraphReport {
    pub nodes: usize,
    pub edges: usize,
    pub attempts: usize,
    pub sigma2: f64,
    pub spectral_gap: f64,
    pub output_path: Option<PathBuf>,
}

/// Generate the network, optionally write the adjacency file, and report
/// size, attempt count, and spectral quantities.
pub fn cmd_graph(config: &ExperimentConfig, out: Option<&Path>) -> Result<GraphReport> {
    config.validate()?;
    let network = build_network(config, config.seeds[0])?;
    let mixing = lazy_metropolis(&network);
    let sigma2 = mixing.second_singular_value()?;
    let output_path = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_path.clone());
    if let Some(path) = &output_path {
        network.write_adjacency(path)?;
    }
    Ok(GraphReport {
        nodes: network.node_count(),
        edges: network.edge_count(),
        attempts: network.attempts(),
        sigma2,
        spectral_gap: 1.0 - sigma2,
        output_path,
    })
}

// ---------------------------------------------------------------------------
// solve-ref
// ---------------------------------------------------------------------------

/// Solve the centralized reference problem; when a path is given, persist
/// the problem document (data files plus box bounds) with the reference pair
/// embedded.
pub fn cmd_solve_ref(
    config: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<ReferenceSolution> {
    config.validate()?;
    let mut instance = build_instance(config, config.bits.first())?;
    let reference = instance
        .problem
        .solve_reference(config.ref_iterations, config.ref_step_scale)?;
    let output_path = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_path.clone());
    if let Some(path) = &output_path {
        instance.problem.write_document(path)?;
    }
    Ok(reference)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// One finished `cmd_run`: the CSV text plus headline quantities.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub csv: String,
    pub run_id: String,
    pub f_star: f64,
    pub sigma2: f64,
    pub rows_per_seed: usize,
    pub output_path: Option<PathBuf>,
}

/// Run the selected update for every seed and emit one metric row per
/// checkpoint, with the bound column filled from the theorem evaluator
/// matching the schedule (quantized mode only).
pub fn cmd_run(
    config: &ExperimentConfig,
    mode: Mode,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<RunArtifact> {
    config.validate()?;
    let bits = config.bits.first();
    let Instance {
        mixing,
        mut problem,
        ..
    } = build_instance(config, bits)?;
    let reference = problem.solve_reference(config.ref_iterations, config.ref_step_scale)?;
    let sigma2 = mixing.second_singular_value()?;
    let mu = problem.min_strong_convexity();
    let schedule = config.schedule.resolve(mu, sigma2)?;
    let checkpoints = config
        .checkpoints
        .clone()
        .unwrap_or_else(|| default_checkpoints(config.rounds));

    let outputs: Vec<RunOutput> = with_pool(threads, || {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                run(
                    &problem,
                    &mixing,
                    &schedule,
                    mode,
                    config.rounds,
                    seed,
                    &checkpoints,
                )
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let inputs = bound_inputs(&problem, sigma2, mu, &schedule, &outputs);
    let bound_for = |round: u64| -> Result<Option<f64>> {
        if mode != Mode::Quantized {
            return Ok(None);
        }
        match schedule {
            StepSchedule::ConvexRate => Ok(Some(bound_convex(round, &inputs)?)),
            StepSchedule::StronglyConvex { .. } => {
                Ok(Some(bound_strongly_convex(round, &inputs)?))
            }
            StepSchedule::Asymptotic { .. } => Ok(None),
        }
    };

    let run_id = format!(
        "{}-{}-b{}-n{}-d{}",
        mode.name(),
        loss_name(config.loss_kind),
        bits,
        config.n,
        config.d
    );
    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# mode={} loss={} n={} d={} bits={} schedule={} beta_clamped={} sigma2={:.16e} f_star={:.16e}",
        mode.name(),
        loss_name(config.loss_kind),
        config.n,
        config.d,
        bits,
        schedule.name(),
        schedule.beta_clamped(),
        sigma2,
        reference.f_star,
    );
    let _ = writeln!(csv, "{CSV_HEADER}");
    let mut rows_per_seed = 0;
    for (&seed, output) in config.seeds.iter().zip(&outputs) {
        rows_per_seed = output.rows.len();
        for row in &output.rows {
            let mut row: MetricRow = row.clone();
            row.bound = bound_for(row.round)?;
            let _ = writeln!(csv, "{}", row.to_csv_line(&run_id, seed, mode.name(), bits));
        }
    }

    let output_path = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_path.clone());
    if let Some(path) = &output_path {
        std::fs::write(path, &csv)?;
    }
    Ok(RunArtifact {
        csv,
        run_id,
        f_star: reference.f_star,
        sigma2,
        rows_per_seed,
        output_path,
    })
}

/// Expected-value inputs of the bound evaluators; the round-0 statistics are
/// sample means over the run's seeds.
fn bound_inputs(
    problem: &ProblemInstance,
    sigma2: f64,
    mu: f64,
    schedule: &StepSchedule,
    outputs: &[RunOutput],
) -> BoundInputs {
    let count = outputs.len().max(1) as f64;
    let initial_distance = outputs
        .iter()
        .filter_map(|o| o.initial_distance)
        .sum::<f64>()
        / count;
    let initial_consensus_sq =
        outputs.iter().map(|o| o.initial_consensus_sq).sum::<f64>() / count;
    let initial_consensus = outputs.iter().map(|o| o.initial_consensus).sum::<f64>() / count;
    let (schedule_a, schedule_b) = match schedule {
        StepSchedule::StronglyConvex { a, b } => (*a, *b),
        _ => (0.0, 0.0),
    };
    BoundInputs {
        nodes: problem.nodes(),
        sigma2,
        total_lipschitz: problem.total_lipschitz(),
        aggregate_step: problem.domain().aggregate_step(),
        strong_convexity: mu,
        schedule_a,
        schedule_b,
        alpha0: schedule.alpha(0),
        beta0: schedule.beta(0),
        initial_distance,
        initial_consensus_sq,
        initial_consensus,
    }
}

// ---------------------------------------------------------------------------
// sweep-bits
// ---------------------------------------------------------------------------

/// How the sweep decides a run has reached the target accuracy.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdRule {
    /// Worst-node relative error `(f(z_i) - f*) / f* <= threshold`.
    Relative { f_star: f64, threshold: f64 },
    /// Worst-node absolute gap `f(z_i) - f* <= epsilon`; the fallback when
    /// `f*` is zero and relative error is unusable.
    Absolute { epsilon: f64 },
}

impl ThresholdRule {
    pub fn satisfied(&self, gap_max: f64) -> bool {
        match self {
            ThresholdRule::Relative { f_star, threshold } => gap_max / f_star <= *threshold,
            ThresholdRule::Absolute { epsilon } => gap_max <= *epsilon,
        }
    }

    fn describe(&self) -> String {
        match self {
            ThresholdRule::Relative { threshold, .. } => format!("relative:{threshold}"),
            ThresholdRule::Absolute { epsilon } => format!("absolute:{epsilon}"),
        }
    }
}

/// First checkpointed round at which the worst-node gap satisfies `rule`,
/// or `None` if the cap is reached first. Checks happen every `check_every`
/// rounds and always at the cap.
pub fn run_until_threshold(
    problem: &ProblemInstance,
    mixing: &MixingMatrix,
    schedule: &StepSchedule,
    cap: u64,
    seed: u64,
    check_every: u64,
    rule: ThresholdRule,
) -> Result<Option<u64>> {
    let f_star = problem.require_reference()?.f_star;
    let rng = RunRng::new(seed);
    let mut state = NetworkState::initialize(problem, &rng);
    for k in 0..=cap {
        update_running_average(&mut state, schedule);
        if k % check_every == 0 || k == cap {
            let (gap_max, _) = gaps(&state, problem, f_star)?;
            if rule.satisfied(gap_max) {
                return Ok(Some(k));
            }
        }
        if k < cap {
            quantized_step(&mut state, problem, mixing, schedule, &rng)?;
        }
    }
    Ok(None)
}

/// One sweep measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepRow {
    pub bits: u32,
    pub seed: u64,
    /// First crossing round, or `NO_CROSSING` when the cap was reached.
    pub crossing_round: i64,
}

/// One finished `cmd_sweep_bits`.
#[derive(Debug, Clone)]
pub struct SweepArtifact {
    pub csv: String,
    pub rows: Vec<SweepRow>,
    pub f_star: f64,
    pub threshold: String,
    pub output_path: Option<PathBuf>,
}

/// For every configured bit width and seed, run the quantized update until
/// the worst-node relative error crosses the configured threshold (or the
/// cap) and record the first-crossing round.
pub fn cmd_sweep_bits(
    config: &ExperimentConfig,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<SweepArtifact> {
    config.validate()?;
    let bits_list = config.bits.list();

    // Bits affect only the quantizer resolution, so the graph, the data, and
    // the reference pair are shared across the whole sweep.
    let Instance {
        mixing,
        mut problem,
        ..
    } = build_instance(config, bits_list[0])?;
    let reference = problem.solve_reference(config.ref_iterations, config.ref_step_scale)?;
    let sigma2 = mixing.second_singular_value()?;
    let mu = problem.min_strong_convexity();
    let schedule = config.schedule.resolve(mu, sigma2)?;
    let rule = if reference.f_star.abs() < 1e-12 {
        ThresholdRule::Absolute {
            epsilon: config.sweep_absolute_epsilon,
        }
    } else {
        ThresholdRule::Relative {
            f_star: reference.f_star,
            threshold: config.sweep_threshold,
        }
    };

    let mut tasks = Vec::new();
    for &bits in &bits_list {
        for &seed in &config.seeds {
            tasks.push((bits, seed));
        }
    }
    let rows: Vec<SweepRow> = with_pool(threads, || {
        tasks
            .par_iter()
            .map(|&(bits, seed)| -> Result<SweepRow> {
                let domain =
                    BoxDomain::uniform(config.box_lower, config.box_upper, bits, config.d)?;
                let mut swept = ProblemInstance::generate(
                    config.n,
                    config.loss_kind,
                    config.points_per_node(),
                    domain,
                    config.seeds[0],
                )?;
                swept.set_reference(reference.clone())?;
                let crossing = run_until_threshold(
                    &swept,
                    &mixing,
                    &schedule,
                    config.sweep_cap,
                    seed,
                    config.sweep_check_every,
                    rule,
                )?;
                Ok(SweepRow {
                    bits,
                    seed,
                    crossing_round: crossing.map(|k| k as i64).unwrap_or(NO_CROSSING),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# threshold={} node=worst cap={} sentinel={} f_star={:.16e}",
        rule.describe(),
        config.sweep_cap,
        NO_CROSSING,
        reference.f_star,
    );
    let _ = writeln!(csv, "bits,seed,crossing_round");
    for row in &rows {
        let _ = writeln!(csv, "{},{},{}", row.bits, row.seed, row.crossing_round);
    }

    let output_path = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_path.clone());
    if let Some(path) = &output_path {
        std::fs::write(path, &csv)?;
    }
    Ok(SweepArtifact {
        csv,
        rows,
        f_star: reference.f_star,
        threshold: rule.describe(),
        output_path,
    })
}
