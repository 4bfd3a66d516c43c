//! Path simulation: factor processes (OU subordinator, fractional Brownian
//! motion) and the log-price given a factor path.

mod fbm;
mod hsii;
mod jumps;
mod ou;

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characteristics::{CharacteristicsError, TimeGrid};
use crate::levy::{LevyError, LevyMeasure};

pub use fbm::{simulate_fbm, FbmSampler, MAX_FBM_POINTS};
pub use hsii::{
    simulate_hsii_path, simulate_levy_increments, HsiiSimulator, LevyIncrements,
};
pub use jumps::JumpTable;
pub use ou::{simulate_ou_subordinator, OuParams};

/// Default small-jump cutoff for infinite-activity measures.
pub const DEFAULT_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("grid has {len} points; dense fBM factorization supports at most {max}")]
    GridTooLarge { len: usize, max: usize },
    #[error("fBM covariance matrix is not numerically positive definite")]
    NotPositiveDefinite,
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Characteristics(#[from] CharacteristicsError),
}

/// Master seed plus a per-path stream id. The pair fully determines the
/// random numbers drawn for one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// A jump of size `size` recorded on grid cell `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub cell: usize,
    pub size: f64,
}

/// Per-cell pieces of a simulated increment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decomposition {
    /// Brownian part `√(c_i Δt_i) N`.
    pub continuous: Vec<f64>,
    /// Gaussian stand-in for the compensated jumps with `|x| <= cutoff`.
    pub small: Vec<f64>,
    /// Individual jumps with `|x| > cutoff`.
    pub jumps: Vec<JumpRecord>,
    pub cutoff: f64,
}

/// Simulated log-price on a grid, `X_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    pub decomposition: Option<Decomposition>,
}

impl SimPath {
    pub fn terminal(&self) -> f64 {
        self.x[self.x.len() - 1]
    }
}

/// Small-jump cutoff actually used for a measure: `eps` for infinite
/// activity, zero (no substitution) otherwise.
pub fn effective_cutoff(measure: &LevyMeasure, eps: f64) -> Result<f64, ModelError> {
    if measure.is_finite_activity() {
        return Ok(0.0);
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(ModelError::InvalidParams(format!(
            "infinite-activity measures need a cutoff in (0, 1], got {eps}"
        )));
    }
    Ok(eps)
}
