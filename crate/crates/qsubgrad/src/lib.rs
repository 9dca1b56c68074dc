//! Distributed subgradient optimization over networks with randomly
//! quantized (dithered) communication.
//!
//! Nodes of a connected graph each hold a private regression loss and
//! cooperatively minimize the sum over a box, exchanging only b-bit
//! quantized iterates with their neighbors. The update is a two-time-scale
//! scheme: a fast stepsize damps the gossip mixing of the quantized values,
//! a slow stepsize drives the subgradient descent. The crate also ships the
//! unquantized baseline, closed-form rate-bound evaluators for comparing
//! theory against measured trajectories, and a reproducible experiment
//! harness with CSV output.
//!
//! # Modules
//!
//! - [`quantizer`] — unbiased random quantization on uniform grids and boxes
//! - [`graph`] — random geometric graphs, lazy Metropolis weights, spectra
//! - [`problems`] — regression objectives, subgradient oracles, reference solver
//! - [`algorithm`] — the quantized update, the baseline, stepsize schedules
//! - [`metrics`] — consensus/gap diagnostics and rate-bound evaluators
//! - [`config`] / [`experiment`] — JSON configuration and the experiment harness
//!
//! # Runnable examples
//!
//! One example per capability, under `examples/`:
//!
//! ```bash
//! cargo run --release --example quantizer_moments
//! cargo run --release --example network_spectrum
//! cargo run --release --example reference_solver
//! cargo run --release --example method_comparison
//! cargo run --release --example rate_bounds
//! cargo run --release --example bits_sweep
//! ```
//!
//! The same capabilities are scriptable through the `qsubgrad` binary
//! (`graph`, `solve-ref`, `run`, `sweep-bits` subcommands).

pub mod algorithm;
pub mod config;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod problems;
pub mod quantizer;
pub mod rng;

pub use algorithm::{Mode, NetworkState, StepSchedule, StepTrace};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use graph::{lazy_metropolis, MixingMatrix, Network};
pub use metrics::{BoundInputs, MetricRow};
pub use problems::{LossKind, NodeObjective, ProblemInstance, RegressionData};
pub use quantizer::{BoxDomain, QuantizerGrid};
