//! The quantized distributed subgradient update and its unquantized baseline.
//!
//! Each round, every node quantizes its iterate once, mixes the quantized
//! values of its neighborhood through the doubly-stochastic weights, damps
//! the mixing with the fast stepsize `beta(k)`, takes a subgradient step with
//! the slow stepsize `alpha(k)`, and projects back onto the box:
//!
//! ```text
//! V(k)   = (1 - beta(k)) X(k) + beta(k) A Q(k) - alpha(k) G(X(k))
//! X(k+1) = project_rows(V(k))
//! ```
//!
//! The unquantized baseline drops the quantizer and the damping:
//! `X(k+1) = project_rows(A X(k) - alpha(k) G(X(k)))`.
//!
//! A round is a synchronization barrier: all of `Q(k)` is materialized from
//! the snapshot `X(k)` before any node updates, and every neighbor of node j
//! observes the same `q_j(k)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::metrics::{consensus_error, optimal_distance, MetricRow};
use crate::problems::ProblemInstance;
use crate::rng::{uniform_in, RunRng};

/// Upper cutoff applied to the fast stepsize so the mixing term stays a
/// convex combination even when the schedule parameter would push it past 1.
pub const BETA_CLAMP: f64 = 0.99;

// ---------------------------------------------------------------------------
// Stepsize schedules
// ---------------------------------------------------------------------------

/// The `(alpha(k), beta(k))` stepsize pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `alpha(k) = 1/(k+2)`, `beta(k) = (k+2)^{-s}` with `s` strictly inside
    /// `(1/2, 1)`. Guarantees almost-sure convergence; maintains no running
    /// average.
    Asymptotic { s: f64 },
    /// `alpha(k) = (k+2)^{-3/4}`, `beta(k) = (k+2)^{-1/2}`; pairs with the
    /// alpha-weighted running average and the convex-regime rate bound.
    ConvexRate,
    /// `alpha(k) = a/(k+2)`, `beta(k) = min(b/(k+2)^{2/3}, BETA_CLAMP)`;
    /// pairs with the arithmetic running average and the strongly-convex
    /// rate bound.
    StronglyConvex { a: f64, b: f64 },
}

impl StepSchedule {
    pub fn asymptotic(s: f64) -> Result<Self> {
        if !(s > 0.5 && s < 1.0) {
            return Err(Error::Config(format!(
                "asymptotic exponent s must lie strictly in (1/2, 1), got {s}"
            )));
        }
        Ok(StepSchedule::Asymptotic { s })
    }

    pub fn convex_rate() -> Self {
        StepSchedule::ConvexRate
    }

    /// Validates `a >= 1/mu` and `b >= 1/(1 - sigma2)` against the instance
    /// constants the strongly-convex guarantee assumes.
    pub fn strongly_convex(a: f64, b: f64, mu: f64, sigma2: f64) -> Result<Self> {
        if mu <= 0.0 {
            return Err(Error::Config(format!(
                "strongly convex schedule needs mu > 0, got {mu}"
            )));
        }
        if !(0.0..1.0).contains(&sigma2) {
            return Err(Error::Config(format!(
                "strongly convex schedule needs 0 <= sigma2 < 1, got {sigma2}"
            )));
        }
        let tolerance = 1.0 - 1e-12;
        if a < tolerance / mu {
            return Err(Error::Config(format!(
                "schedule parameter a = {a} below 1/mu = {}",
                1.0 / mu
            )));
        }
        if b < tolerance / (1.0 - sigma2) {
            return Err(Error::Config(format!(
                "schedule parameter b = {b} below 1/(1 - sigma2) = {}",
                1.0 / (1.0 - sigma2)
            )));
        }
        Ok(StepSchedule::StronglyConvex { a, b })
    }

    /// Slow (optimization) stepsize at round `k`.
    pub fn alpha(&self, k: u64) -> f64 {
        let kk = (k + 2) as f64;
        match self {
            StepSchedule::Asymptotic { .. } => 1.0 / kk,
            StepSchedule::ConvexRate => kk.powf(-0.75),
            StepSchedule::StronglyConvex { a, .. } => a / kk,
        }
    }

    /// Fast (mixing) stepsize at round `k`.
    pub fn beta(&self, k: u64) -> f64 {
        let kk = (k + 2) as f64;
        match self {
            StepSchedule::Asymptotic { s } => kk.powf(-s),
            StepSchedule::ConvexRate => kk.powf(-0.5),
            StepSchedule::StronglyConvex { b, .. } => (b / kk.powf(2.0 / 3.0)).min(BETA_CLAMP),
        }
    }

    /// Whether the cutoff shrinks the raw `beta(0)`.
    pub fn beta_clamped(&self) -> bool {
        match self {
            StepSchedule::StronglyConvex { b, .. } => b / 2.0f64.powf(2.0 / 3.0) > BETA_CLAMP,
            _ => false,
        }
    }

    fn averaging(&self) -> Averaging {
        match self {
            StepSchedule::Asymptotic { .. } => Averaging::None,
            StepSchedule::ConvexRate => Averaging::AlphaWeighted,
            StepSchedule::StronglyConvex { .. } => Averaging::Arithmetic,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepSchedule::Asymptotic { .. } => "asymptotic",
            StepSchedule::ConvexRate => "convex_rate",
            StepSchedule::StronglyConvex { .. } => "strongly_convex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Averaging {
    None,
    AlphaWeighted,
    Arithmetic,
}

/// Which update drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Quantized two-time-scale update.
    Quantized,
    /// Unquantized distributed subgradient baseline, reusing the schedule's
    /// `alpha(k)` for a like-for-like comparison.
    Dsg,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Quantized => "quantized",
            Mode::Dsg => "dsg",
        }
    }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// Iterates, running averages, and the averaging weight accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    iterates: DMatrix<f64>,
    averages: DMatrix<f64>,
    weight_accumulator: f64,
    round: u64,
}

impl NetworkState {
    /// Sample every node's initial iterate uniformly in the box.
    pub fn initialize(problem: &ProblemInstance, rng: &RunRng) -> Self {
        let n = problem.nodes();
        let d = problem.dimension();
        let mut iterates = DMatrix::zeros(n, d);
        for node in 0..n {
            let mut stream = rng.initialization(node);
            for coordinate in 0..d {
                let grid = problem.domain().grid(coordinate);
                iterates[(node, coordinate)] =
                    uniform_in(&mut stream, grid.lower(), grid.upper());
            }
        }
        NetworkState {
            averages: iterates.clone(),
            iterates,
            weight_accumulator: 0.0,
            round: 0,
        }
    }

    /// Wrap an explicit iterate matrix at a given round; for single-step
    /// experiments and tests.
    pub fn from_iterates(iterates: DMatrix<f64>, round: u64) -> Self {
        NetworkState {
            averages: iterates.clone(),
            iterates,
            weight_accumulator: 0.0,
            round,
        }
    }

    pub fn iterates(&self) -> &DMatrix<f64> {
        &self.iterates
    }

    /// The iterates gap metrics are evaluated at: the running averages for
    /// the averaging schedules, the current iterates otherwise.
    pub fn averages(&self) -> &DMatrix<f64> {
        &self.averages
    }

    pub fn weight_accumulator(&self) -> f64 {
        self.weight_accumulator
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn node_iterate(&self, node: usize) -> DVector<f64> {
        self.iterates.row(node).transpose()
    }

    pub fn node_average(&self, node: usize) -> DVector<f64> {
        self.averages.row(node).transpose()
    }
}

/// Per-step diagnostics of one quantized update.
#[derive(Debug, Clone)]
pub struct StepTrace {
    /// `Q(k)`: the quantized iterates every receiver observed.
    pub quantized: DMatrix<f64>,
    /// `Q(k) - X(k)`.
    pub quantization_error: DMatrix<f64>,
    /// `V(k)`: the combined update before projection.
    pub pre_projection: DMatrix<f64>,
    /// `V(k) - X(k+1)`.
    pub projection_error: DMatrix<f64>,
}

// ---------------------------------------------------------------------------
// Updates
// ---------------------------------------------------------------------------

/// One quantized two-time-scale round with explicit stepsizes.
pub fn quantized_step_with(
    state: &mut NetworkState,
    problem: &ProblemInstance,
    mixing: &MixingMatrix,
    alpha: f64,
    beta: f64,
    rng: &RunRng,
) -> Result<StepTrace> {
    let n = problem.nodes();
    let d = problem.dimension();
    let round = state.round;

    // One quantization per node; the same draw feeds every receiver,
    // including the node's own diagonal weight.
    let mut quantized = DMatrix::zeros(n, d);
    for node in 0..n {
        let mut stream = rng.quantization(round, node);
        let row = state.node_iterate(node);
        let q = problem.domain().quantize(&row, &mut stream).map_err(|source| {
            Error::InvariantBreach {
                invariant: "iterate inside box before quantization",
                round,
                detail: source.to_string(),
            }
        })?;
        for coordinate in 0..d {
            quantized[(node, coordinate)] = q[coordinate];
        }
    }

    let quantization_error = &quantized - &state.iterates;
    for node in 0..n {
        for coordinate in 0..d {
            let grid = problem.domain().grid(coordinate);
            let step = grid.step();
            // Bin endpoints are computed values; allow a few ulps of the
            // interval scale on top of the one-step bound.
            let scale = grid.lower().abs().max(grid.upper().abs()) + 1.0;
            let tolerance = step * (1.0 + 1e-12) + 64.0 * f64::EPSILON * scale;
            let error = quantization_error[(node, coordinate)].abs();
            if error > tolerance {
                return Err(Error::InvariantBreach {
                    invariant: "quantization error within one grid step",
                    round,
                    detail: format!(
                        "node {node} coordinate {coordinate}: |e| = {error} > step = {step}"
                    ),
                });
            }
        }
    }

    let subgradients = subgradient_matrix(state.iterates(), problem)?;
    let pre_projection =
        (1.0 - beta) * &state.iterates + beta * (mixing.weights() * &quantized)
            - alpha * &subgradients;

    let mut next = DMatrix::zeros(n, d);
    for node in 0..n {
        let projected = problem
            .domain()
            .project(&pre_projection.row(node).transpose());
        for coordinate in 0..d {
            next[(node, coordinate)] = projected[coordinate];
        }
    }

    let projection_error = &pre_projection - &next;
    for node in 0..n {
        let magnitude = projection_error.row(node).norm();
        let budget = problem.objective(node).lipschitz() * alpha;
        if magnitude > budget * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::InvariantBreach {
                invariant: "projection error within L_i * alpha",
                round,
                detail: format!("node {node}: ||xi|| = {magnitude} > {budget}"),
            });
        }
    }

    state.iterates = next;
    state.round = round + 1;
    Ok(StepTrace {
        quantized,
        quantization_error,
        pre_projection,
        projection_error,
    })
}

/// One quantized round with the schedule's stepsizes at the current round.
pub fn quantized_step(
    state: &mut NetworkState,
    problem: &ProblemInstance,
    mixing: &MixingMatrix,
    schedule: &StepSchedule,
    rng: &RunRng,
) -> Result<StepTrace> {
    let k = state.round;
    quantized_step_with(state, problem, mixing, schedule.alpha(k), schedule.beta(k), rng)
}

/// One unquantized baseline round:
/// `X(k+1) = project_rows(A X(k) - alpha G(X(k)))`.
pub fn dsg_step(
    state: &mut NetworkState,
    problem: &ProblemInstance,
    mixing: &MixingMatrix,
    alpha: f64,
) -> Result<()> {
    let subgradients = subgradient_matrix(state.iterates(), problem)?;
    let pre_projection = mixing.weights() * &state.iterates - alpha * subgradients;
    let n = problem.nodes();
    let d = problem.dimension();
    let mut next = DMatrix::zeros(n, d);
    for node in 0..n {
        let projected = problem
            .domain()
            .project(&pre_projection.row(node).transpose());
        for coordinate in 0..d {
            next[(node, coordinate)] = projected[coordinate];
        }
    }
    state.iterates = next;
    state.round += 1;
    Ok(())
}

/// Fold the current iterates into the running averages with the schedule's
/// weighting: alpha-weighted for the convex-rate schedule, arithmetic mean
/// for the strongly-convex one. The asymptotic schedule keeps no average,
/// so the evaluation iterates simply track the current ones.
pub fn update_running_average(state: &mut NetworkState, schedule: &StepSchedule) {
    match schedule.averaging() {
        Averaging::None => {
            state.averages.copy_from(&state.iterates);
        }
        Averaging::AlphaWeighted | Averaging::Arithmetic => {
            let weight = match schedule.averaging() {
                Averaging::AlphaWeighted => schedule.alpha(state.round),
                _ => 1.0,
            };
            if state.weight_accumulator == 0.0 {
                // First fold lands on X exactly, whatever the weight.
                state.averages.copy_from(&state.iterates);
            } else {
                let total = state.weight_accumulator + weight;
                state.averages = (weight * &state.iterates
                    + state.weight_accumulator * &state.averages)
                    / total;
            }
            state.weight_accumulator += weight;
        }
    }
}

fn subgradient_matrix(iterates: &DMatrix<f64>, problem: &ProblemInstance) -> Result<DMatrix<f64>> {
    let n = problem.nodes();
    let d = problem.dimension();
    let mut subgradients = DMatrix::zeros(n, d);
    for node in 0..n {
        let g = problem
            .objective(node)
            .subgradient(&iterates.row(node).transpose())?;
        for coordinate in 0..d {
            subgradients[(node, coordinate)] = g[coordinate];
        }
    }
    Ok(subgradients)
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Result of one seeded run: checkpoint rows plus the round-0 statistics the
/// bound evaluators need.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricRow>,
    /// `r(0)`; present when the problem has a reference solution.
    pub initial_distance: Option<f64>,
    /// `||Y(0)||^2`.
    pub initial_consensus_sq: f64,
    /// `||Y(0)||`.
    pub initial_consensus: f64,
}

/// Geometric checkpoint grid `{0, 1, 2, 4, 8, ...}` plus the final round.
pub fn default_checkpoints(rounds: u64) -> Vec<u64> {
    let mut checkpoints = vec![0];
    let mut k = 1u64;
    while k < rounds {
        checkpoints.push(k);
        k = k.saturating_mul(2);
    }
    if rounds > 0 {
        checkpoints.push(rounds);
    }
    checkpoints.dedup();
    checkpoints
}

/// Execute `rounds` update steps from the seeded initialization, recording a
/// metric row at every checkpoint. Fully reproducible from `(seed, inputs)`.
pub fn run(
    problem: &ProblemInstance,
    mixing: &MixingMatrix,
    schedule: &StepSchedule,
    mode: Mode,
    rounds: u64,
    seed: u64,
    checkpoints: &[u64],
) -> Result<RunOutput> {
    let rng = RunRng::new(seed);
    let mut state = NetworkState::initialize(problem, &rng);
    let mut marks: Vec<u64> = checkpoints.iter().copied().filter(|&k| k <= rounds).collect();
    marks.sort_unstable();
    marks.dedup();

    let initial = consensus_error(state.iterates());
    let output_distance = problem
        .reference()
        .map(|reference| optimal_distance(state.iterates(), &reference.point()));

    let mut rows = Vec::with_capacity(marks.len());
    for k in 0..=rounds {
        update_running_average(&mut state, schedule);
        if marks.binary_search(&k).is_ok() {
            rows.push(metric_row(&state, problem, schedule)?);
        }
        if k < rounds {
            match mode {
                Mode::Quantized => {
                    quantized_step(&mut state, problem, mixing, schedule, &rng)?;
                }
                Mode::Dsg => {
                    dsg_step(&mut state, problem, mixing, schedule.alpha(k))?;
                }
            }
        }
    }

    Ok(RunOutput {
        rows,
        initial_distance: output_distance,
        initial_consensus_sq: initial * initial,
        initial_consensus: initial,
    })
}

/// Diagnostics of the current state; gap columns appear only when the
/// problem carries a reference solution.
pub fn metric_row(
    state: &NetworkState,
    problem: &ProblemInstance,
    schedule: &StepSchedule,
) -> Result<MetricRow> {
    let k = state.round;
    let consensus = consensus_error(state.iterates());
    let (distance, gap_max, gap_mean) = match problem.reference() {
        None => (None, None, None),
        Some(reference) => {
            let distance = optimal_distance(state.iterates(), &reference.point());
            let (max, mean) = gaps(state, problem, reference.f_star)?;
            (Some(distance), Some(max), Some(mean))
        }
    };
    Ok(MetricRow {
        round: k,
        alpha: schedule.alpha(k),
        beta: schedule.beta(k),
        consensus_frobenius: consensus,
        optimal_distance: distance,
        gap_max,
        gap_mean,
        bound: None,
    })
}

/// Worst-node and mean optimality gap at the evaluation iterates.
pub fn gaps(state: &NetworkState, problem: &ProblemInstance, f_star: f64) -> Result<(f64, f64)> {
    let n = problem.nodes();
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for node in 0..n {
        let value = problem.total_value(&state.node_average(node))?;
        let gap = value - f_star;
        max = max.max(gap);
        sum += gap;
    }
    Ok((max, sum / n as f64))
}
