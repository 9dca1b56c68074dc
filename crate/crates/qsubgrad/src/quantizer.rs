//! Unbiased random (dithered) quantization on uniform grids.
//!
//! A grid splits `[lower, upper]` into `2^bits` uniformly spaced points. A
//! value x between two neighboring points is rounded up with probability
//! proportional to its offset within the bin, which makes the rounding
//! unbiased: `E[q] = x`, `E[(q - x)^2] <= step^2 / 4`, and `|q - x| <= step`
//! on every draw. Vectors are quantized coordinate-wise over a product box,
//! one fresh draw per coordinate.

use nalgebra::DVector;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::uniform01;

/// Largest usable bit width: `2^bits - 1` must stay exactly representable
/// in an f64 mantissa.
pub const MAX_BITS: u32 = 52;

// ---------------------------------------------------------------------------
// QuantizerGrid
// ---------------------------------------------------------------------------

/// A uniform quantization grid on a closed interval.
///
/// The grid has `levels = 2^bits` points spaced `step` apart, with the first
/// point at `lower` and the last exactly at `upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerGrid {
    lower: f64,
    upper: f64,
    bits: u32,
    levels: u64,
    step: f64,
}

impl QuantizerGrid {
    /// Build a grid over `[lower, upper]` with `2^bits` levels.
    pub fn new(lower: f64, upper: f64, bits: u32) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "interval bounds must be finite, got [{lower}, {upper}]"
            )));
        }
        if upper <= lower {
            return Err(Error::InvalidGrid(format!(
                "upper bound {upper} must exceed lower bound {lower}"
            )));
        }
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidGrid(format!(
                "bits must lie in 1..={MAX_BITS}, got {bits}"
            )));
        }
        let levels = 1u64 << bits;
        let step = (upper - lower) / (levels - 1) as f64;
        Ok(QuantizerGrid {
            lower,
            upper,
            bits,
            levels,
            step,
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of grid points, `2^bits`.
    pub fn levels(&self) -> u64 {
        self.levels
    }

    /// Distance between neighboring grid points.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// The `index`-th grid point. Endpoints are returned exactly.
    pub fn point(&self, index: u64) -> f64 {
        debug_assert!(index < self.levels);
        if index == 0 {
            self.lower
        } else if index == self.levels - 1 {
            self.upper
        } else {
            self.lower + index as f64 * self.step
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Randomly quantize `x` to one of its two neighboring grid points.
    ///
    /// Returns the lower neighbor with probability `1 - p` and the upper one
    /// with probability `p`, where `p` is the fractional offset of `x` in its
    /// bin. Grid points are returned unchanged with probability 1.
    pub fn quantize(&self, x: f64, rng: &mut impl RngCore) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutOfInterval {
                value: x,
                lower: self.lower,
                upper: self.upper,
            });
        }
        if x == self.upper {
            return Ok(self.upper);
        }
        // Clamp the bin index so roundoff near bin edges never indexes past
        // the last bin.
        let raw = ((x - self.lower) / self.step).floor();
        let index = (raw.max(0.0) as u64).min(self.levels - 2);
        let low = self.point(index);
        let high = self.point(index + 1);
        let p = ((x - low) / (high - low)).clamp(0.0, 1.0);
        if uniform01(rng) < p {
            Ok(high)
        } else {
            Ok(low)
        }
    }
}

// ---------------------------------------------------------------------------
// BoxDomain
// ---------------------------------------------------------------------------

/// A product of per-coordinate grids; doubles as the constraint box
/// `[l^1, u^1] x ... x [l^d, u^d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    grids: Vec<QuantizerGrid>,
}

impl BoxDomain {
    pub fn new(grids: Vec<QuantizerGrid>) -> Result<Self> {
        if grids.is_empty() {
            return Err(Error::InvalidGrid("box needs at least one coordinate".into()));
        }
        Ok(BoxDomain { grids })
    }

    /// A box with the same interval and bit width on every coordinate.
    pub fn uniform(lower: f64, upper: f64, bits: u32, dimension: usize) -> Result<Self> {
        let grid = QuantizerGrid::new(lower, upper, bits)?;
        Self::new(vec![grid; dimension.max(1)])
    }

    pub fn dimension(&self) -> usize {
        self.grids.len()
    }

    pub fn grid(&self, coordinate: usize) -> &QuantizerGrid {
        &self.grids[coordinate]
    }

    pub fn grids(&self) -> &[QuantizerGrid] {
        &self.grids
    }

    /// Sum of the coordinate steps; the aggregate quantization resolution.
    pub fn aggregate_step(&self) -> f64 {
        self.grids.iter().map(|g| g.step()).sum()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(&self.grids)
                .all(|(&value, grid)| grid.contains(value))
    }

    /// Euclidean projection onto the box: coordinate-wise clamping.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len().min(self.dimension()),
            x.iter()
                .zip(&self.grids)
                .map(|(&value, grid)| value.clamp(grid.lower(), grid.upper())),
        )
    }

    /// Midpoint of the box; a convenient deterministic start point.
    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dimension(),
            self.grids.iter().map(|g| 0.5 * (g.lower() + g.upper())),
        )
    }

    /// Quantize each coordinate independently on its own grid, drawing one
    /// fresh random value per coordinate.
    pub fn quantize(&self, x: &DVector<f64>, rng: &mut impl RngCore) -> Result<DVector<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        let mut out = DVector::zeros(x.len());
        for (coordinate, grid) in self.grids.iter().enumerate() {
            out[coordinate] = grid.quantize(x[coordinate], rng)?;
        }
        Ok(out)
    }
}
