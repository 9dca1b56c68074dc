//! Experiment configuration: a JSON document with documented defaults.
//!
//! Missing fields fall back to the headline experiment shape (50 nodes,
//! dimension 10, radius 0.4, 10^4 rounds, box [-1, 1]^d). Every rejected
//! value names the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithm::StepSchedule;
use crate::error::{Error, Result};
use crate::problems::LossKind;
use crate::quantizer::MAX_BITS;

/// A single bit width for runs, or a list for sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BitsSpec {
    Single(u32),
    Sweep(Vec<u32>),
}

impl BitsSpec {
    /// The bit width a plain run uses.
    pub fn first(&self) -> u32 {
        match self {
            BitsSpec::Single(bits) => *bits,
            BitsSpec::Sweep(list) => list.first().copied().unwrap_or(0),
        }
    }

    pub fn list(&self) -> Vec<u32> {
        match self {
            BitsSpec::Single(bits) => vec![*bits],
            BitsSpec::Sweep(list) => list.clone(),
        }
    }
}

/// Declarative stepsize schedule; strongly-convex parameters left unset are
/// resolved to the smallest admissible values for the instance at hand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Asymptotic {
        s: f64,
    },
    ConvexRate,
    StronglyConvex {
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
    },
}

impl ScheduleSpec {
    /// Resolve against the instance constants `mu` (smallest strong-convexity
    /// modulus) and `sigma2` (mixing matrix).
    pub fn resolve(&self, mu: f64, sigma2: f64) -> Result<StepSchedule> {
        match self {
            ScheduleSpec::Asymptotic { s } => StepSchedule::asymptotic(*s),
            ScheduleSpec::ConvexRate => Ok(StepSchedule::convex_rate()),
            ScheduleSpec::StronglyConvex { a, b } => {
                if mu <= 0.0 && a.is_none() {
                    return Err(Error::Config(
                        "schedule.a: cannot default to 1/mu because the instance has mu = 0"
                            .into(),
                    ));
                }
                let a = a.unwrap_or(1.0 / mu);
                let b = b.unwrap_or(1.0 / (1.0 - sigma2));
                StepSchedule::strongly_convex(a, b, mu, sigma2)
            }
        }
    }

    /// Validation that needs no instance constants.
    fn validate(&self) -> Result<()> {
        if let ScheduleSpec::Asymptotic { s } = self {
            if !(*s > 0.5 && *s < 1.0) {
                return Err(Error::Config(format!(
                    "schedule.s: must lie strictly in (1/2, 1), got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleSpec::Asymptotic { .. } => "asymptotic",
            ScheduleSpec::ConvexRate => "convex_rate",
            ScheduleSpec::StronglyConvex { .. } => "strongly_convex",
        }
    }
}

fn default_n() -> usize {
    50
}
fn default_d() -> usize {
    10
}
fn default_radius() -> f64 {
    0.4
}
fn default_bits() -> BitsSpec {
    BitsSpec::Single(8)
}
fn default_loss() -> LossKind {
    LossKind::Quadratic
}
fn default_schedule() -> ScheduleSpec {
    ScheduleSpec::ConvexRate
}
fn default_rounds() -> u64 {
    10_000
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_ref_iterations() -> u64 {
    1_000_000
}
fn default_ref_step_scale() -> f64 {
    0.1
}
fn default_box_lower() -> f64 {
    -1.0
}
fn default_box_upper() -> f64 {
    1.0
}
fn default_max_attempts() -> usize {
    1000
}
fn default_sweep_threshold() -> f64 {
    0.2
}
fn default_sweep_cap() -> u64 {
    200_000
}
fn default_sweep_absolute_epsilon() -> f64 {
    1e-3
}
fn default_sweep_check_every() -> u64 {
    1
}

/// Everything an experiment needs, deserializable from a JSON object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of nodes.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Decision dimension.
    #[serde(default = "default_d")]
    pub d: usize,
    /// Connection radius of the geometric graph.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Bit width(s) of the per-coordinate quantizers.
    #[serde(default = "default_bits")]
    pub bits: BitsSpec,
    #[serde(default = "default_loss")]
    pub loss_kind: LossKind,
    /// Data points per node; defaults to d + 2 so quadratic node objectives
    /// are strongly convex almost surely.
    #[serde(default)]
    pub points_per_node: Option<usize>,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_rounds")]
    pub rounds: u64,
    /// Seeds to run; the first seed also fixes the graph and the data.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Iteration budget of the centralized reference solver.
    #[serde(default = "default_ref_iterations")]
    pub ref_iterations: u64,
    #[serde(default = "default_ref_step_scale")]
    pub ref_step_scale: f64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Rounds at which metric rows are recorded; defaults to the geometric
    /// grid {0, 1, 2, 4, ...} plus the final round.
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    /// Shared box bounds applied to every coordinate.
    #[serde(default = "default_box_lower")]
    pub box_lower: f64,
    #[serde(default = "default_box_upper")]
    pub box_upper: f64,
    /// Regeneration budget for the connectivity retry loop.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    /// Relative-error threshold of the bits sweep.
    #[serde(default = "default_sweep_threshold")]
    pub sweep_threshold: f64,
    /// Round cap of the bits sweep; non-crossing runs record the sentinel -1.
    #[serde(default = "default_sweep_cap")]
    pub sweep_cap: u64,
    /// Absolute-gap fallback when f* is zero and relative error is unusable.
    #[serde(default = "default_sweep_absolute_epsilon")]
    pub sweep_absolute_epsilon: f64,
    /// Sweep threshold check cadence; crossings resolve to this grid.
    #[serde(default = "default_sweep_check_every")]
    pub sweep_check_every: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty object must deserialize")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn points_per_node(&self) -> usize {
        self.points_per_node.unwrap_or(self.d + 2)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::Config(message));
        if self.n < 2 {
            return fail(format!("n: distributed modes need n >= 2, got {}", self.n));
        }
        if self.d < 1 {
            return fail("d: dimension must be at least 1".into());
        }
        if !(self.radius > 0.0) {
            return fail(format!("radius: must be positive, got {}", self.radius));
        }
        let bits = self.bits.list();
        if bits.is_empty() {
            return fail("bits: sweep list must be nonempty".into());
        }
        for &b in &bits {
            if b == 0 || b > MAX_BITS {
                return fail(format!("bits: must lie in 1..={MAX_BITS}, got {b}"));
            }
        }
        if self.rounds < 1 {
            return fail("rounds: must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds: must be nonempty".into());
        }
        if self.points_per_node() < 1 {
            return fail("points_per_node: must be at least 1".into());
        }
        if self.ref_iterations < 1 {
            return fail("ref_iterations: must be at least 1".into());
        }
        if !(self.ref_step_scale > 0.0) {
            return fail(format!(
                "ref_step_scale: must be positive, got {}",
                self.ref_step_scale
            ));
        }
        if !(self.box_upper > self.box_lower) {
            return fail(format!(
                "box bounds: need box_lower < box_upper, got [{}, {}]",
                self.box_lower, self.box_upper
            ));
        }
        if self.max_attempts < 1 {
            return fail("max_attempts: must be at least 1".into());
        }
        if !(self.sweep_threshold > 0.0) {
            return fail(format!(
                "sweep_threshold: must be positive, got {}",
                self.sweep_threshold
            ));
        }
        if self.sweep_cap < 1 {
            return fail("sweep_cap: must be at least 1".into());
        }
        if !(self.sweep_absolute_epsilon > 0.0) {
            return fail(format!(
                "sweep_absolute_epsilon: must be positive, got {}",
                self.sweep_absolute_epsilon
            ));
        }
        if self.sweep_check_every < 1 {
            return fail("sweep_check_every: must be at least 1".into());
        }
        self.schedule.validate()
    }
}
