//! Per-node regression objectives and the centralized reference solver.
//!
//! Each node holds a small regression data set and minimizes either a
//! quadratic or an absolute (robust) loss over a box. The module exposes
//! subgradient oracles, a Lipschitz constant valid over the box, the
//! strong-convexity modulus, and a projected-subgradient reference solver
//! that produces the optimal pair `(x*, f*)` used by gap metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::BoxDomain;
use crate::rng::{uniform01, CounterRng, Purpose};

// ---------------------------------------------------------------------------
// Data and objectives
// ---------------------------------------------------------------------------

/// Which per-point loss a node applies to its residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Sum of squared residuals; strongly convex when the data has full rank.
    Quadratic,
    /// Sum of absolute residuals; convex but not strongly convex.
    Absolute,
}

/// A node-local training set: feature rows and scalar targets.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    features: DMatrix<f64>,
    targets: DVector<f64>,
}

impl RegressionData {
    pub fn new(features: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Config("regression data needs at least one point".into()));
        }
        if features.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: targets.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("regression data must be finite".into()));
        }
        Ok(RegressionData { features, targets })
    }

    /// `points` feature/target pairs, all entries i.i.d. uniform on [0, 1].
    pub fn generate(points: usize, dimension: usize, rng: &mut impl RngCore) -> Self {
        let features =
            DMatrix::from_fn(points, dimension, |_, _| uniform01(rng));
        let targets = DVector::from_fn(points, |_, _| uniform01(rng));
        RegressionData { features, targets }
    }

    pub fn points(&self) -> usize {
        self.features.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_row(&self, p: usize) -> DVector<f64> {
        self.features.row(p).transpose()
    }

    pub fn target(&self, p: usize) -> f64 {
        self.targets[p]
    }

    /// One CSV row per data point: d feature columns, then the target.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for p in 0..self.points() {
            let mut fields: Vec<String> = (0..self.dimension())
                .map(|j| format!("{:.16e}", self.features[(p, j)]))
                .collect();
            fields.push(format!("{:.16e}", self.targets[p]));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn from_csv_string(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| Error::Parse {
                        kind: "regression data",
                        line: index + 1,
                        detail: format!("bad number `{t}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() < 2 {
                return Err(Error::Parse {
                    kind: "regression data",
                    line: index + 1,
                    detail: "need at least one feature and a target".into(),
                });
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Parse {
                        kind: "regression data",
                        line: index + 1,
                        detail: "inconsistent column count".into(),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                kind: "regression data",
                line: 1,
                detail: "no data rows".into(),
            });
        }
        let d = rows[0].len() - 1;
        let features = DMatrix::from_fn(rows.len(), d, |p, j| rows[p][j]);
        let targets = DVector::from_fn(rows.len(), |p, _| rows[p][d]);
        RegressionData::new(features, targets)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_string(&std::fs::read_to_string(path)?)
    }
}

/// One node's loss with its cached regularity constants.
#[derive(Debug, Clone)]
pub struct NodeObjective {
    loss: LossKind,
    data: RegressionData,
    lipschitz: f64,
    strong_convexity: f64,
}

impl NodeObjective {
    /// Attach constants valid over `domain` to the node's data.
    pub fn new(loss: LossKind, data: RegressionData, domain: &BoxDomain) -> Result<Self> {
        if data.dimension() != domain.dimension() {
            return Err(Error::DimensionMismatch {
                expected: domain.dimension(),
                actual: data.dimension(),
            });
        }
        let lipschitz = lipschitz_bound(loss, &data, domain);
        let strong_convexity = strong_convexity_modulus(loss, &data);
        Ok(NodeObjective {
            loss,
            data,
            lipschitz,
            strong_convexity,
        })
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn data(&self) -> &RegressionData {
        &self.data
    }

    /// Subgradient-norm bound valid everywhere in the construction box.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Strong-convexity modulus; zero for the absolute loss.
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    /// Loss value at `x`.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dimension(x)?;
        let mut total = 0.0;
        for p in 0..self.data.points() {
            let residual = self.residual(p, x);
            total += match self.loss {
                LossKind::Quadratic => residual * residual,
                LossKind::Absolute => residual.abs(),
            };
        }
        Ok(total)
    }

    /// A subgradient at `x`. For the absolute loss, zero residuals
    /// contribute nothing (the zero element of the subdifferential).
    pub fn subgradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dimension(x)?;
        let mut g = DVector::zeros(x.len());
        for p in 0..self.data.points() {
            let residual = self.residual(p, x);
            let scale = match self.loss {
                LossKind::Quadratic => 2.0 * residual,
                LossKind::Absolute => {
                    if residual > 0.0 {
                        1.0
                    } else if residual < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
            };
            if scale != 0.0 {
                for j in 0..x.len() {
                    g[j] += scale * self.data.features[(p, j)];
                }
            }
        }
        Ok(g)
    }

    fn residual(&self, p: usize, x: &DVector<f64>) -> f64 {
        let mut dot = 0.0;
        for j in 0..x.len() {
            dot += self.data.features[(p, j)] * x[j];
        }
        dot - self.data.targets[p]
    }

    fn check_dimension(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.data.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dimension(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Subgradient-norm bound over the box.
///
/// Absolute loss: `sum_p ||a_p||`. Quadratic: `sum_p 2 ||a_p|| R_p` where
/// `R_p = sum_j |a_pj| max(|l^j|, |u^j|) + |b_p|` bounds the residual
/// magnitude coordinate-wise over the box.
pub fn lipschitz_bound(loss: LossKind, data: &RegressionData, domain: &BoxDomain) -> f64 {
    let mut total = 0.0;
    for p in 0..data.points() {
        let row = data.feature_row(p);
        let norm = row.norm();
        total += match loss {
            LossKind::Absolute => norm,
            LossKind::Quadratic => {
                let mut residual_bound = data.target(p).abs();
                for j in 0..row.len() {
                    let grid = domain.grid(j);
                    residual_bound += row[j].abs() * grid.lower().abs().max(grid.upper().abs());
                }
                2.0 * norm * residual_bound
            }
        };
    }
    total
}

/// Strong-convexity modulus: `2 lambda_min(sum_p a_p a_p^T)` for the
/// quadratic loss, zero for the absolute loss.
pub fn strong_convexity_modulus(loss: LossKind, data: &RegressionData) -> f64 {
    match loss {
        LossKind::Absolute => 0.0,
        LossKind::Quadratic => {
            let gram = data.features.transpose() * &data.features;
            let eigen = gram.symmetric_eigen();
            let smallest = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            // Rank-deficient data produces tiny negative eigenvalues in
            // floating point; the modulus is zero there.
            (2.0 * smallest).max(0.0)
        }
    }
}

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

/// The constrained optimal pair produced by the reference solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

impl ReferenceSolution {
    pub fn point(&self) -> DVector<f64> {
        DVector::from_vec(self.x_star.clone())
    }
}

/// The full network objective: one `NodeObjective` per node over a shared box.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    objectives: Vec<NodeObjective>,
    domain: BoxDomain,
    reference: Option<ReferenceSolution>,
}

impl ProblemInstance {
    pub fn new(objectives: Vec<NodeObjective>, domain: BoxDomain) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::Config("problem needs at least one objective".into()));
        }
        for objective in &objectives {
            if objective.data().dimension() != domain.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: domain.dimension(),
                    actual: objective.data().dimension(),
                });
            }
        }
        Ok(ProblemInstance {
            objectives,
            domain,
            reference: None,
        })
    }

    /// Generate `nodes` objectives with `points_per_node` uniform [0,1] data
    /// points each, deterministically from `seed`.
    pub fn generate(
        nodes: usize,
        loss: LossKind,
        points_per_node: usize,
        domain: BoxDomain,
        seed: u64,
    ) -> Result<Self> {
        let objectives = (0..nodes)
            .map(|node| {
                let mut rng = CounterRng::from_parts(seed, 0, node as u64, Purpose::NodeData);
                let data =
                    RegressionData::generate(points_per_node, domain.dimension(), &mut rng);
                NodeObjective::new(loss, data, &domain)
            })
            .collect::<Result<Vec<_>>>()?;
        ProblemInstance::new(objectives, domain)
    }

    pub fn nodes(&self) -> usize {
        self.objectives.len()
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn objective(&self, node: usize) -> &NodeObjective {
        &self.objectives[node]
    }

    pub fn objectives(&self) -> &[NodeObjective] {
        &self.objectives
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Total objective `f(x) = sum_i f_i(x)`.
    pub fn total_value(&self, x: &DVector<f64>) -> Result<f64> {
        let mut total = 0.0;
        for objective in &self.objectives {
            total += objective.value(x)?;
        }
        Ok(total)
    }

    /// A subgradient of the total objective.
    pub fn total_subgradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(x.len());
        for objective in &self.objectives {
            g += objective.subgradient(x)?;
        }
        Ok(g)
    }

    /// Sum of the per-node Lipschitz constants.
    pub fn total_lipschitz(&self) -> f64 {
        self.objectives.iter().map(|o| o.lipschitz()).sum()
    }

    /// Smallest per-node strong-convexity modulus.
    pub fn min_strong_convexity(&self) -> f64 {
        self.objectives
            .iter()
            .map(|o| o.strong_convexity())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn reference(&self) -> Option<&ReferenceSolution> {
        self.reference.as_ref()
    }

    pub fn require_reference(&self) -> Result<&ReferenceSolution> {
        self.reference.as_ref().ok_or(Error::MissingReference)
    }

    /// Attach a reference solution, validating `f* = sum_i f_i(x*)`.
    pub fn set_reference(&mut self, reference: ReferenceSolution) -> Result<()> {
        let recomputed = self.total_value(&reference.point())?;
        if (recomputed - reference.f_star).abs() > 1e-9 * (1.0 + reference.f_star.abs()) {
            return Err(Error::Config(format!(
                "reference value {} disagrees with recomputed {}",
                reference.f_star, recomputed
            )));
        }
        self.reference = Some(reference);
        Ok(())
    }

    /// Centralized projected subgradient on `f` over the box with steps
    /// `step_scale / sqrt(k+1)`, tracking the best iterate seen. Stores and
    /// returns the best pair.
    pub fn solve_reference(
        &mut self,
        iterations: u64,
        step_scale: f64,
    ) -> Result<ReferenceSolution> {
        if iterations < 1 {
            return Err(Error::Config("reference solver needs at least one iteration".into()));
        }
        let mut x = self.domain.center();
        let mut best_x = x.clone();
        let mut best_value = self.total_value(&x)?;
        for k in 0..iterations {
            let g = self.total_subgradient(&x)?;
            let step = step_scale / ((k + 1) as f64).sqrt();
            x = self.domain.project(&(&x - step * g));
            let value = self.total_value(&x)?;
            if value < best_value {
                best_value = value;
                best_x = x.clone();
            }
        }
        let reference = ReferenceSolution {
            x_star: best_x.iter().copied().collect(),
            f_star: best_value,
        };
        self.reference = Some(reference.clone());
        Ok(reference)
    }
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// On-disk description of a problem: loss kind, box bounds, per-node data
/// file paths (relative to the document), and the optional reference pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub loss_kind: LossKind,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    pub node_data: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSolution>,
}

impl ProblemInstance {
    /// Write `<stem>.json` plus one `<stem>_node_NNN.csv` per node into the
    /// directory of `path`.
    pub fn write_document(&self, path: &Path) -> Result<()> {
        let directory = path.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(directory)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "problem".into());
        let mut node_data = Vec::new();
        for (node, objective) in self.objectives.iter().enumerate() {
            let file = PathBuf::from(format!("{stem}_node_{node:03}.csv"));
            objective.data().write_csv(&directory.join(&file))?;
            node_data.push(file);
        }
        let document = ProblemDocument {
            loss_kind: self.objectives[0].loss_kind(),
            box_lower: self.domain.grids().iter().map(|g| g.lower()).collect(),
            box_upper: self.domain.grids().iter().map(|g| g.upper()).collect(),
            node_data,
            reference: self.reference.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&document)?)?;
        Ok(())
    }

    /// Load a problem document; `bits` fixes the quantizer resolution on the
    /// stored box bounds.
    pub fn read_document(path: &Path, bits: u32) -> Result<Self> {
        let document: ProblemDocument =
            serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if document.box_lower.len() != document.box_upper.len() {
            return Err(Error::Config("box bound arrays differ in length".into()));
        }
        let grids = document
            .box_lower
            .iter()
            .zip(&document.box_upper)
            .map(|(&lower, &upper)| crate::quantizer::QuantizerGrid::new(lower, upper, bits))
            .collect::<Result<Vec<_>>>()?;
        let domain = BoxDomain::new(grids)?;
        let directory = path.parent().unwrap_or(Path::new("."));
        let objectives = document
            .node_data
            .iter()
            .map(|file| {
                let data = RegressionData::read_csv(&directory.join(file))?;
                NodeObjective::new(document.loss_kind, data, &domain)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut instance = ProblemInstance::new(objectives, domain)?;
        if let Some(reference) = document.reference {
            instance.set_reference(reference)?;
        }
        Ok(instance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn single_point(loss: LossKind, a: &[f64], b: f64, domain: &BoxDomain) -> NodeObjective {
        let features = DMatrix::from_row_slice(1, a.len(), a);
        let data = RegressionData::new(features, dvector![b]).unwrap();
        NodeObjective::new(loss, data, domain).unwrap()
    }

    fn box2() -> BoxDomain {
        BoxDomain::uniform(-1.0, 1.0, 4, 2).unwrap()
    }

    #[test]
    fn quadratic_value_single_point() {
        let objective = single_point(LossKind::Quadratic, &[1.0, 0.0], 0.0, &box2());
        assert_relative_eq!(
            objective.value(&dvector![0.5, 0.3]).unwrap(),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn absolute_value_zero_residual() {
        let domain = BoxDomain::uniform(-2.0, 2.0, 4, 1).unwrap();
        let objective = single_point(LossKind::Absolute, &[1.0], 1.0, &domain);
        assert_eq!(objective.value(&dvector![1.0]).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_value_constant_direction() {
        let objective = single_point(LossKind::Quadratic, &[0.0, 0.0], 2.0, &box2());
        for x in [dvector![0.0, 0.0], dvector![1.0, -1.0], dvector![0.3, 0.7]] {
            assert_relative_eq!(objective.value(&x).unwrap(), 4.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn quadratic_subgradient_hand_case() {
        let objective = single_point(LossKind::Quadratic, &[1.0, 0.0], 0.0, &box2());
        let g = objective.subgradient(&dvector![0.5, 0.0]).unwrap();
        assert_relative_eq!(g[0], 1.0, epsilon = 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn absolute_subgradient_hand_case() {
        let domain = BoxDomain::uniform(-2.0, 2.0, 4, 1).unwrap();
        let objective = single_point(LossKind::Absolute, &[1.0], 1.0, &domain);
        assert_eq!(objective.subgradient(&dvector![0.5]).unwrap()[0], -1.0);
        // Exact zero residual picks the zero element of the subdifferential.
        assert_eq!(objective.subgradient(&dvector![1.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn value_rejects_dimension_mismatch() {
        let objective = single_point(LossKind::Quadratic, &[1.0, 0.0], 0.0, &box2());
        assert!(objective.value(&dvector![1.0]).is_err());
        assert!(objective.subgradient(&dvector![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn lipschitz_absolute_is_feature_norm() {
        let objective = single_point(LossKind::Absolute, &[3.0, 4.0], 0.0, &box2());
        assert_relative_eq!(objective.lipschitz(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn lipschitz_quadratic_hand_case() {
        let objective = single_point(LossKind::Quadratic, &[1.0, 0.0], 0.0, &box2());
        assert_relative_eq!(objective.lipschitz(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn lipschitz_zero_data() {
        let objective = single_point(LossKind::Quadratic, &[0.0, 0.0], 0.0, &box2());
        assert_eq!(objective.lipschitz(), 0.0);
    }

    #[test]
    fn strong_convexity_identity_gram() {
        let features = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let data = RegressionData::new(features, dvector![0.0, 0.0]).unwrap();
        let objective = NodeObjective::new(LossKind::Quadratic, data, &box2()).unwrap();
        assert_relative_eq!(objective.strong_convexity(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_convexity_degenerate_cases() {
        let absolute = single_point(LossKind::Absolute, &[1.0, 1.0], 0.5, &box2());
        assert_eq!(absolute.strong_convexity(), 0.0);
        // One point in two dimensions: rank-deficient Gram.
        let thin = single_point(LossKind::Quadratic, &[1.0, 1.0], 0.5, &box2());
        assert!(thin.strong_convexity().abs() < 1e-12);
    }

    #[test]
    fn projection_is_nonexpansive() {
        let domain = box2();
        let mut rng = CounterRng::from_parts(21, 0, 0, Purpose::NodeData);
        for _ in 0..100 {
            let sample = |rng: &mut CounterRng| {
                dvector![
                    crate::rng::uniform_in(rng, -3.0, 3.0),
                    crate::rng::uniform_in(rng, -3.0, 3.0)
                ]
            };
            let x = sample(&mut rng);
            let y = sample(&mut rng);
            let px = domain.project(&x);
            let py = domain.project(&y);
            assert!((px - py).norm() <= (x - y).norm() + 1e-15);
        }
    }

    #[test]
    fn subgradients_support_the_function_from_below() {
        let domain = BoxDomain::uniform(-1.0, 1.0, 4, 3).unwrap();
        let instance =
            ProblemInstance::generate(4, LossKind::Absolute, 5, domain.clone(), 99).unwrap();
        let quadratic =
            ProblemInstance::generate(4, LossKind::Quadratic, 5, domain.clone(), 77).unwrap();
        let mut rng = CounterRng::from_parts(5, 0, 0, Purpose::NodeData);
        let mut sample = |rng: &mut CounterRng| {
            DVector::from_fn(3, |_, _| crate::rng::uniform_in(rng, -1.0, 1.0))
        };
        for _ in 0..1000 {
            let x = sample(&mut rng);
            let y = sample(&mut rng);
            for problem in [&instance, &quadratic] {
                for objective in problem.objectives() {
                    let fx = objective.value(&x).unwrap();
                    let fy = objective.value(&y).unwrap();
                    let g = objective.subgradient(&x).unwrap();
                    assert!(
                        fy >= fx + g.dot(&(&y - &x)) - 1e-10,
                        "supporting-plane inequality violated"
                    );
                    // Lipschitz soundness over the box.
                    assert!((fx - fy).abs() <= objective.lipschitz() * (&x - &y).norm() + 1e-10);
                    assert!(g.norm() <= objective.lipschitz() + 1e-10);
                }
            }
        }
    }

    #[test]
    fn strong_convexity_inequality_holds_on_samples() {
        let domain = BoxDomain::uniform(-1.0, 1.0, 4, 2).unwrap();
        let instance =
            ProblemInstance::generate(3, LossKind::Quadratic, 6, domain.clone(), 13).unwrap();
        let mut rng = CounterRng::from_parts(6, 0, 0, Purpose::NodeData);
        let mut sample = |rng: &mut CounterRng| {
            DVector::from_fn(2, |_, _| crate::rng::uniform_in(rng, -1.0, 1.0))
        };
        for _ in 0..1000 {
            let x = sample(&mut rng);
            let y = sample(&mut rng);
            for objective in instance.objectives() {
                let mu = objective.strong_convexity();
                assert!(mu > 0.0, "6 random points in d=2 should be full rank");
                let fx = objective.value(&x).unwrap();
                let fy = objective.value(&y).unwrap();
                let g = objective.subgradient(&x).unwrap();
                let gap = fy - fx - g.dot(&(&y - &x));
                assert!(gap >= 0.5 * mu * (&y - &x).norm_squared() - 1e-10);
            }
        }
    }

    #[test]
    fn reference_solver_clamped_quadratic() {
        // (x - 2)^2 on [-1, 1]: minimizer clamps to 1 with value 1.
        let domain = BoxDomain::uniform(-1.0, 1.0, 8, 1).unwrap();
        let objective = single_point(LossKind::Quadratic, &[1.0], 2.0, &domain);
        let mut problem = ProblemInstance::new(vec![objective], domain).unwrap();
        let reference = problem.solve_reference(10_000, 0.1).unwrap();
        assert!((reference.x_star[0] - 1.0).abs() < 1e-6);
        assert!((reference.f_star - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reference_solver_absolute_loss() {
        let domain = BoxDomain::uniform(-1.0, 1.0, 8, 1).unwrap();
        let objective = single_point(LossKind::Absolute, &[1.0], 0.5, &domain);
        let mut problem = ProblemInstance::new(vec![objective], domain).unwrap();
        let reference = problem.solve_reference(1_000_000, 0.1).unwrap();
        assert!((reference.x_star[0] - 0.5).abs() < 1e-6);
        assert!(reference.f_star < 1e-6);
    }

    #[test]
    fn reference_solver_matches_grid_search() {
        let domain = BoxDomain::uniform(-1.0, 1.0, 8, 2).unwrap();
        let mut problem =
            ProblemInstance::generate(3, LossKind::Quadratic, 4, domain.clone(), 2024).unwrap();
        let reference = problem.solve_reference(200_000, 0.05).unwrap();

        // Independent oracle: exhaustive grid search at resolution 1e-3.
        let mut best = f64::INFINITY;
        let steps = 2001;
        for i in 0..steps {
            let x0 = -1.0 + 2.0 * i as f64 / (steps - 1) as f64;
            for j in 0..steps {
                let x1 = -1.0 + 2.0 * j as f64 / (steps - 1) as f64;
                let value = problem.total_value(&dvector![x0, x1]).unwrap();
                if value < best {
                    best = value;
                }
            }
        }
        assert!(
            (reference.f_star - best).abs() < 1e-3,
            "solver {} vs grid {}",
            reference.f_star,
            best
        );
    }

    #[test]
    fn reference_best_value_is_monotone_in_iterations() {
        let domain = BoxDomain::uniform(-1.0, 1.0, 8, 2).unwrap();
        let base =
            ProblemInstance::generate(3, LossKind::Absolute, 4, domain.clone(), 31).unwrap();
        let mut previous = f64::INFINITY;
        for iterations in [10, 100, 1_000, 10_000] {
            let mut problem = base.clone();
            let reference = problem.solve_reference(iterations, 0.1).unwrap();
            assert!(reference.f_star <= previous + 1e-15);
            previous = reference.f_star;
        }
    }

    #[test]
    fn data_csv_round_trip() {
        let mut rng = CounterRng::from_parts(8, 0, 0, Purpose::NodeData);
        let data = RegressionData::generate(7, 3, &mut rng);
        let restored = RegressionData::from_csv_string(&data.to_csv_string()).unwrap();
        assert_eq!(restored, data);
        assert!(RegressionData::from_csv_string("1.0,garbage\n").is_err());
        assert!(RegressionData::from_csv_string("").is_err());
    }

    #[test]
    fn problem_document_round_trip() {
        let directory = tempfile::tempdir().unwrap();
        let path = directory.path().join("problem.json");
        let domain = BoxDomain::uniform(-1.0, 1.0, 6, 2).unwrap();
        let mut problem =
            ProblemInstance::generate(3, LossKind::Quadratic, 4, domain, 5).unwrap();
        problem.solve_reference(20_000, 0.05).unwrap();
        problem.write_document(&path).unwrap();
        let restored = ProblemInstance::read_document(&path, 6).unwrap();
        assert_eq!(restored.nodes(), 3);
        assert_eq!(restored.dimension(), 2);
        let x = dvector![0.2, -0.4];
        assert_relative_eq!(
            restored.total_value(&x).unwrap(),
            problem.total_value(&x).unwrap(),
            max_relative = 1e-12
        );
        let a = restored.reference().unwrap();
        let b = problem.reference().unwrap();
        assert_eq!(a.f_star, b.f_star);
        assert_eq!(a.x_star, b.x_star);
    }
}
