//! Seeded noise calibrated to an exact data-norm level.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ForwardProblem;

/// Noise source: ChaCha20 keyed by `seed`, one independent stream per study cell.
///
/// ChaCha20 output is specified bit-for-bit, so draws are identical on every
/// platform for the same `(seed, stream)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub seed: u64,
    pub stream: u64,
}

impl NoiseModel {
    pub const GENERATOR: &'static str = "chacha20";

    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Stream for ladder index `j` and repetition `rep`.
    pub fn for_cell(self, j: u32, rep: u32) -> Self {
        Self {
            seed: self.seed,
            stream: (u64::from(j) << 32) | u64::from(rep),
        }
    }

    fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `y + e` with `e` white Gaussian in observation coordinates, scaled so that
/// `‖e‖_Y = δ`.
pub fn make_noisy_data(
    problem: &dyn ForwardProblem,
    y: &DVector<f64>,
    delta: f64,
    model: NoiseModel,
) -> Result<DVector<f64>> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta must be finite and >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(y.clone());
    }
    let mut rng = model.rng();
    for _ in 0..2 {
        let e = DVector::from_fn(y.len(), |_, _| StandardNormal.sample(&mut rng));
        let norm = problem.data_norm(&e);
        if norm > 0.0 && norm.is_finite() {
            return Ok(y + e * (delta / norm));
        }
    }
    Err(Error::ZeroNoise)
}
