//! Counter-based random streams.
//!
//! Every random decision in a simulation run is drawn from a stream keyed by
//! `(master seed, round, node, purpose)`; the i-th value of a stream depends
//! only on the key and on i. Results are therefore independent of evaluation
//! order and of how work is split across threads, which is what makes runs
//! byte-reproducible under any parallel schedule.

use rand::RngCore;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; statistically solid for Monte-Carlo use.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold key components into a single stream key.
fn derive_key(parts: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3u64; // arbitrary nonzero start
    for (i, &part) in parts.iter().enumerate() {
        acc = mix64(acc ^ part.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN_GAMMA)));
    }
    acc
}

/// What a stream is used for. Distinct tags keep streams for different
/// purposes independent even when the other key components coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Node coordinates during graph generation.
    GraphCoordinates,
    /// Per-node regression data.
    NodeData,
    /// Initial iterates x_i(0).
    Initialization,
    /// Quantization draws within a round.
    Quantization,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::GraphCoordinates => 1,
            Purpose::NodeData => 2,
            Purpose::Initialization => 3,
            Purpose::Quantization => 4,
        }
    }
}

/// A stateless-keyed counter RNG: output i is `mix64(key + i * gamma)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn from_parts(seed: u64, round: u64, node: u64, purpose: Purpose) -> Self {
        CounterRng {
            key: derive_key(&[seed, round, node, purpose.tag()]),
            counter: 0,
        }
    }

    fn raw(&mut self) -> u64 {
        let value = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)));
        self.counter += 1;
        value
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.raw() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.raw()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.raw().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Handle carrying the master seed of one simulation run; hands out the
/// derived per-(round, node) streams.
#[derive(Debug, Clone, Copy)]
pub struct RunRng {
    seed: u64,
}

impl RunRng {
    pub fn new(seed: u64) -> Self {
        RunRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for sampling node `node`'s initial iterate.
    pub fn initialization(&self, node: usize) -> CounterRng {
        CounterRng::from_parts(self.seed, 0, node as u64, Purpose::Initialization)
    }

    /// Stream for node `node`'s quantization draws at round `round`.
    pub fn quantization(&self, round: u64, node: usize) -> CounterRng {
        CounterRng::from_parts(self.seed, round, node as u64, Purpose::Quantization)
    }
}

/// Uniform draw on `[0, 1)` with 53 bits of resolution.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on `[lower, upper)`.
pub fn uniform_in(rng: &mut impl RngCore, lower: f64, upper: f64) -> f64 {
    lower + uniform01(rng) * (upper - lower)
}
