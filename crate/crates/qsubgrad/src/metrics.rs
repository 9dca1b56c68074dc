//! Trajectory diagnostics and closed-form rate-bound evaluators.
//!
//! The diagnostics mirror the quantities the convergence analysis tracks:
//! the consensus error (Frobenius norm of the deviation of all iterates from
//! their average), the squared distance of the average iterate to the
//! optimum, and optimality gaps evaluated at running-average iterates. The
//! two bound evaluators turn the convex and strongly-convex rate guarantees
//! into functions of the round counter so measured trajectories can be
//! checked against them directly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Trajectory diagnostics
// ---------------------------------------------------------------------------

/// Frobenius norm of `X - 1 xbar^T`: how far the rows of `X` are from their
/// common average.
pub fn consensus_error(iterates: &DMatrix<f64>) -> f64 {
    let n = iterates.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..iterates.ncols() {
        let column = iterates.column(j);
        let mean = column.sum() / n as f64;
        total += column.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>();
    }
    total.sqrt()
}

/// Squared Euclidean distance of the row average of `X` to `target`.
pub fn optimal_distance(iterates: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
    let n = iterates.nrows();
    let mut total = 0.0;
    for j in 0..iterates.ncols() {
        let mean = iterates.column(j).sum() / n as f64;
        let diff = mean - target[j];
        total += diff * diff;
    }
    total
}

/// `gap / f_star`, guarded against a vanishing reference value.
pub fn relative_error(gap: f64, f_star: f64) -> Result<f64> {
    if f_star.abs() < 1e-12 {
        return Err(Error::ZeroReference);
    }
    Ok(gap / f_star)
}

// ---------------------------------------------------------------------------
// Metric rows
// ---------------------------------------------------------------------------

/// One checkpoint of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub round: u64,
    pub alpha: f64,
    pub beta: f64,
    /// `||Y(k)||`, the consensus error.
    pub consensus_frobenius: f64,
    /// `||xbar(k) - x*||^2`; absent without a reference solution.
    pub optimal_distance: Option<f64>,
    /// Worst-node optimality gap at the evaluation iterates.
    pub gap_max: Option<f64>,
    /// Node-average optimality gap.
    pub gap_mean: Option<f64>,
    /// Matching theorem bound at this round, when one applies.
    pub bound: Option<f64>,
}

/// Fixed CSV schema: `run_id,seed,algo,bits,round,alpha,beta,consensus_fro,r,gap_max,gap_mean,bound`.
pub const CSV_HEADER: &str =
    "run_id,seed,algo,bits,round,alpha,beta,consensus_fro,r,gap_max,gap_mean,bound";

impl MetricRow {
    /// Serialize with run context, floats at 17 significant digits so values
    /// round-trip exactly.
    pub fn to_csv_line(&self, run_id: &str, seed: u64, algo: &str, bits: u32) -> String {
        let float = |v: f64| format!("{v:.16e}");
        let optional = |v: Option<f64>| v.map(float).unwrap_or_default();
        format!(
            "{run_id},{seed},{algo},{bits},{round},{alpha},{beta},{consensus},{r},{gap_max},{gap_mean},{bound}",
            round = self.round,
            alpha = float(self.alpha),
            beta = float(self.beta),
            consensus = float(self.consensus_frobenius),
            r = optional(self.optimal_distance),
            gap_max = optional(self.gap_max),
            gap_mean = optional(self.gap_mean),
            bound = optional(self.bound),
        )
    }
}

// ---------------------------------------------------------------------------
// Rate-bound evaluators
// ---------------------------------------------------------------------------

/// Constants entering the rate bounds.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    /// Number of nodes.
    pub nodes: usize,
    /// Second-largest singular value of the mixing matrix.
    pub sigma2: f64,
    /// Sum of the per-node Lipschitz constants.
    pub total_lipschitz: f64,
    /// Aggregate quantization step, the sum of per-coordinate steps.
    pub aggregate_step: f64,
    /// Smallest per-node strong-convexity modulus.
    pub strong_convexity: f64,
    /// Schedule parameters of the strongly-convex regime.
    pub schedule_a: f64,
    pub schedule_b: f64,
    /// First stepsizes actually used by the schedule (clamps included).
    pub alpha0: f64,
    pub beta0: f64,
    /// Expected initial optimal distance `E[r(0)]`.
    pub initial_distance: f64,
    /// Expected initial squared consensus error `E[||Y(0)||^2]`.
    pub initial_consensus_sq: f64,
    /// Expected initial consensus error `E[||Y(0)||]`.
    pub initial_consensus: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.sigma2) {
            return Err(Error::Config(format!(
                "bound evaluation needs 0 <= sigma2 < 1, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

/// Convex-regime bound on the expected worst-node gap at round `k` under the
/// convex-rate schedule. Logarithms and the decay factor are both evaluated
/// at the same round.
pub fn bound_convex(k: u64, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let n = inputs.nodes as f64;
    let gap = 1.0 - inputs.sigma2;
    let l2 = inputs.total_lipschitz * inputs.total_lipschitz;
    let d2 = inputs.aggregate_step * inputs.aggregate_step;
    let log_term = 1.0 + ((k + 2) as f64).ln();
    let numerator = n * inputs.initial_distance / 8.0
        + n * inputs.initial_consensus_sq / (2.0 * gap)
        + 16.0 * l2
        + 9.0 * n * l2 * log_term / (2.0 * gap * gap)
        + 5.0 * n * n * d2 * log_term / 8.0;
    Ok(numerator / ((k + 1) as f64).powf(0.25))
}

/// Strongly-convex-regime bound on the expected worst-node squared distance
/// `||z_i(k) - x*||^2` at round `k`.
pub fn bound_strongly_convex(k: u64, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if inputs.strong_convexity <= 0.0 {
        return Err(Error::Config(format!(
            "strongly convex bound needs mu > 0, got {}",
            inputs.strong_convexity
        )));
    }
    let n = inputs.nodes as f64;
    let gap = 1.0 - inputs.sigma2;
    let l2 = inputs.total_lipschitz * inputs.total_lipschitz;
    let d2 = inputs.aggregate_step * inputs.aggregate_step;
    let alpha0 = inputs.alpha0;
    let beta0 = inputs.beta0;
    let log_term = 1.0 + ((k + 2) as f64).ln();
    let fast = n * inputs.initial_distance
        + 4.0 * n * inputs.initial_consensus * log_term / gap
        + 6.0 * l2 * alpha0 * alpha0 * log_term / (1.0 - beta0);
    let slow = n * d2 * beta0 * beta0
        + 4.0 * l2 * alpha0 * alpha0 / (beta0 * inputs.strong_convexity)
        + 8.0 * n * n * inputs.sigma2 * inputs.sigma2 * d2 * beta0 * beta0 / (gap * gap)
        + 27.0 * n * l2 * alpha0 / (beta0 * gap * gap * gap);
    let kk = (k + 2) as f64;
    Ok(fast / kk + slow / kk.powf(1.0 / 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::centering_matrix;
    use crate::rng::{uniform_in, CounterRng, Purpose};
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use proptest::prelude::*;

    fn zero_inputs() -> BoundInputs {
        BoundInputs {
            nodes: 2,
            sigma2: 0.0,
            total_lipschitz: 0.0,
            aggregate_step: 0.0,
            strong_convexity: 1.0,
            schedule_a: 1.0,
            schedule_b: 1.0,
            alpha0: 0.5,
            beta0: 0.5,
            initial_distance: 0.0,
            initial_consensus_sq: 0.0,
            initial_consensus: 0.0,
        }
    }

    #[test]
    fn consensus_error_hand_cases() {
        let equal = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(consensus_error(&equal), 0.0);
        let spread = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        assert_relative_eq!(consensus_error(&spread), 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn consensus_error_is_translation_invariant() {
        let mut rng = CounterRng::from_parts(1, 0, 0, Purpose::NodeData);
        let x = DMatrix::from_fn(6, 3, |_, _| uniform_in(&mut rng, -2.0, 2.0));
        let shift = DVector::from_fn(3, |j, _| 10.0 + j as f64);
        let mut shifted = x.clone();
        for i in 0..6 {
            for j in 0..3 {
                shifted[(i, j)] += shift[j];
            }
        }
        assert_relative_eq!(
            consensus_error(&shifted),
            consensus_error(&x),
            max_relative = 1e-12
        );
    }

    #[test]
    fn consensus_error_equals_centering_product_norm() {
        // Independent route: ||W X||_F with the explicit centering matrix.
        let mut rng = CounterRng::from_parts(2, 0, 0, Purpose::NodeData);
        for trial in 0..20 {
            let n = 2 + (trial % 7) as usize;
            let x = DMatrix::from_fn(n, 4, |_, _| uniform_in(&mut rng, -5.0, 5.0));
            let product = centering_matrix(n) * &x;
            assert_relative_eq!(
                consensus_error(&x),
                product.norm(),
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn optimal_distance_hand_cases() {
        let x = DMatrix::from_row_slice(1, 2, &[0.8, 0.9]);
        let target = dvector![0.5, 0.5];
        assert_relative_eq!(optimal_distance(&x, &target), 0.25, epsilon = 1e-15);
        // Symmetric spread around the target cancels in the mean.
        let symmetric = DMatrix::from_row_slice(2, 2, &[0.7, 0.6, 0.3, 0.4]);
        assert_relative_eq!(optimal_distance(&symmetric, &target), 0.0, epsilon = 1e-30);
        let exact = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(optimal_distance(&exact, &target), 0.0);
    }

    #[test]
    fn bound_convex_frozen_value() {
        // n=2, sigma2=0, L=1, Delta=1, r0=Y0=0, k=0:
        // 16 + 9(1+ln 2) + 2.5(1+ln 2).
        let inputs = BoundInputs {
            total_lipschitz: 1.0,
            aggregate_step: 1.0,
            ..zero_inputs()
        };
        let expected = 16.0 + 11.5 * (1.0 + 2.0f64.ln());
        assert!((bound_convex(0, &inputs).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 35.4712).abs() < 1e-3);
    }

    #[test]
    fn bound_convex_zero_constants_vanish() {
        let inputs = zero_inputs();
        for k in [0, 10, 1_000_000] {
            assert_eq!(bound_convex(k, &inputs).unwrap(), 0.0);
        }
    }

    #[test]
    fn bound_convex_eventually_decreases() {
        let inputs = BoundInputs {
            nodes: 20,
            sigma2: 0.9,
            total_lipschitz: 50.0,
            aggregate_step: 0.1,
            initial_distance: 3.0,
            initial_consensus_sq: 10.0,
            ..zero_inputs()
        };
        // Scan a geometric grid: after the first decrease the sequence must
        // keep decreasing (the log grows slower than k^{1/4}).
        let mut values = Vec::new();
        let mut k = 1u64;
        while k <= 1_000_000 {
            values.push(bound_convex(k, &inputs).unwrap());
            k *= 2;
        }
        let first_drop = values.windows(2).position(|w| w[1] < w[0]).unwrap();
        for window in values[first_drop..].windows(2) {
            assert!(window[1] < window[0]);
        }
        assert!(bound_convex(1_000_000, &inputs).unwrap() < bound_convex(1_000, &inputs).unwrap());
    }

    #[test]
    fn bound_convex_rejects_bad_sigma() {
        let inputs = BoundInputs {
            sigma2: 1.0,
            ..zero_inputs()
        };
        assert!(bound_convex(0, &inputs).is_err());
    }

    #[test]
    fn bound_strongly_convex_frozen_value() {
        // Only the n*Delta^2*beta0^2 term survives: 2^{-1/3}/2^{1/3} = 2^{-2/3}.
        let beta0 = 2.0f64.powf(-2.0 / 3.0);
        let inputs = BoundInputs {
            aggregate_step: 1.0,
            schedule_b: 1.0,
            alpha0: 0.5,
            beta0,
            ..zero_inputs()
        };
        let value = bound_strongly_convex(0, &inputs).unwrap();
        assert!((value - 2.0f64.powf(-2.0 / 3.0)).abs() < 1e-12);
        assert!((value - 0.62996).abs() < 1e-5);
    }

    #[test]
    fn bound_strongly_convex_zero_constants_vanish() {
        let inputs = BoundInputs {
            aggregate_step: 0.0,
            ..zero_inputs()
        };
        for k in [0, 5, 1_000_000] {
            assert_eq!(bound_strongly_convex(k, &inputs).unwrap(), 0.0);
        }
    }

    #[test]
    fn bound_strongly_convex_decays() {
        let inputs = BoundInputs {
            nodes: 20,
            sigma2: 0.8,
            total_lipschitz: 40.0,
            aggregate_step: 0.05,
            strong_convexity: 0.3,
            alpha0: 1.5,
            beta0: 0.99,
            initial_distance: 2.0,
            initial_consensus_sq: 8.0,
            initial_consensus: 2.5,
            ..zero_inputs()
        };
        assert!(
            bound_strongly_convex(1_000_000, &inputs).unwrap()
                < bound_strongly_convex(1_000, &inputs).unwrap()
        );
    }

    #[test]
    fn bound_strongly_convex_requires_positive_modulus() {
        let inputs = BoundInputs {
            strong_convexity: 0.0,
            ..zero_inputs()
        };
        assert!(bound_strongly_convex(0, &inputs).is_err());
    }

    #[test]
    fn relative_error_cases() {
        assert_relative_eq!(relative_error(0.2 * 5.0, 5.0).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(relative_error(0.0, 3.0).unwrap(), 0.0);
        assert!(matches!(relative_error(1.0, 0.0), Err(Error::ZeroReference)));
    }

    #[test]
    fn csv_line_has_fixed_schema() {
        let row = MetricRow {
            round: 3,
            alpha: 0.5,
            beta: 0.25,
            consensus_frobenius: 1.5,
            optimal_distance: Some(0.125),
            gap_max: None,
            gap_mean: None,
            bound: Some(7.0),
        };
        let line = row.to_csv_line("demo", 11, "quantized", 8);
        assert_eq!(line.split(',').count(), CSV_HEADER.split(',').count());
        assert!(line.starts_with("demo,11,quantized,8,3,"));
        // Empty optional fields keep their column positions.
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[9], "");
        assert_eq!(fields[10], "");
        // 17 significant digits round-trip exactly.
        assert_eq!(fields[7].parse::<f64>().unwrap(), 1.5);
    }

    proptest! {
        #[test]
        fn bounds_are_nonnegative(
            nodes in 1usize..200,
            sigma2 in 0.0f64..0.999,
            lipschitz in 0.0f64..1e4,
            step in 0.0f64..1e2,
            mu in 1e-6f64..1e3,
            r0 in 0.0f64..1e3,
            y0sq in 0.0f64..1e3,
            k in 0u64..1_000_000,
        ) {
            let beta0 = 0.99f64.min(1.0 / (1.0 - sigma2) / 2.0f64.powf(2.0 / 3.0));
            let inputs = BoundInputs {
                nodes,
                sigma2,
                total_lipschitz: lipschitz,
                aggregate_step: step,
                strong_convexity: mu,
                schedule_a: 1.0 / mu,
                schedule_b: 1.0 / (1.0 - sigma2),
                alpha0: 0.5 / mu,
                beta0,
                initial_distance: r0,
                initial_consensus_sq: y0sq,
                initial_consensus: y0sq.sqrt(),
            };
            prop_assert!(bound_convex(k, &inputs).unwrap() >= 0.0);
            prop_assert!(bound_strongly_convex(k, &inputs).unwrap() >= 0.0);
        }
    }
}
