use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::characteristics::{FactorPath, TimeGrid};

use super::{ModelError, RngSpec};

/// Largest grid accepted by the dense Cholesky sampler.
pub const MAX_FBM_POINTS: usize = 4096;

/// Fractional Brownian motion on a fixed grid via the Cholesky factor of its
/// covariance `½(s^{2H} + t^{2H} − |t − s|^{2H})`. Build once, sample many.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: f64,
    grid: TimeGrid,
    /// Index of the first grid point with `t > 0`.
    first: usize,
    factor: DMatrix<f64>,
}

impl FbmSampler {
    pub fn new(hurst: f64, grid: &TimeGrid) -> Result<Self, ModelError> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "Hurst index must lie in (0, 1), got {hurst}"
            )));
        }
        if grid.len() > MAX_FBM_POINTS {
            return Err(ModelError::GridTooLarge {
                len: grid.len(),
                max: MAX_FBM_POINTS,
            });
        }
        if grid.start() < 0.0 {
            return Err(ModelError::InvalidParams("fBM grid must start at t >= 0".into()));
        }
        let first = usize::from(grid.start() == 0.0);
        let t = &grid.times()[first..];
        let n = t.len();
        let two_h = 2.0 * hurst;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            0.5 * (t[i].powf(two_h) + t[j].powf(two_h) - (t[i] - t[j]).abs().powf(two_h))
        });
        let chol = cov.cholesky().ok_or(ModelError::NotPositiveDefinite)?;
        Ok(FbmSampler {
            hurst,
            grid: grid.clone(),
            first,
            factor: chol.unpack(),
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FactorPath {
        let n = self.factor.nrows();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = &self.factor * z;
        let mut values = Vec::with_capacity(self.grid.len());
        if self.first == 1 {
            values.push(0.0);
        }
        values.extend(y.iter());
        FactorPath::new(self.grid.clone(), values).expect("finite Gaussian sample")
    }
}

/// One fBM path on `grid` from the stream given by `rng`.
pub fn simulate_fbm(hurst: f64, grid: &TimeGrid, rng: &RngSpec) -> Result<FactorPath, ModelError> {
    Ok(FbmSampler::new(hurst, grid)?.sample(&mut rng.rng()))
}
