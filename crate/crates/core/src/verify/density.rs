use crate::characteristics::LocalCharacteristics;
use crate::girsanov::GirsanovPair;
use crate::levy::{JumpWeight, Quantity};
use crate::models::SimPath;

use super::VerifyError;

/// Density process `Z` on the path's grid, `Z_0 = 1`, `Z_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPath {
    pub values: Vec<f64>,
}

impl DensityPath {
    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Per-cell deterministic pieces of `ln Z`:
/// `ln ΔZ_i = β_i ΔX^c_i + θ_i G_i + drift_i + Σ ln U(i, ΔX)` over jumps in
/// the cell, where `G_i` is the small-jump Gaussian.
#[derive(Debug, Clone)]
pub(crate) struct DensityCoeffs {
    beta: Vec<f64>,
    theta: Vec<f64>,
    drift: Vec<f64>,
    identity_u: bool,
}

impl DensityCoeffs {
    pub(crate) fn new(
        lc: &LocalCharacteristics,
        pair: &GirsanovPair,
        cutoff: f64,
    ) -> Result<Self, VerifyError> {
        let n = lc.cells();
        let grid = lc.grid();
        let identity_u = pair.u.is_identity();
        let jumps = lc.has_jumps() && !identity_u;
        let w = lc.weight();
        let k = lc.kernel();
        let comp = if jumps {
            k.integral_cells(n, w, &pair.u, Quantity::CompensatorAbove(cutoff))?
        } else {
            vec![0.0; n]
        };
        let (var, tilt) = if jumps && cutoff > 0.0 {
            (
                k.integral_cells(n, w, &JumpWeight::Identity, Quantity::SmallVariance(cutoff))?,
                k.integral_cells(n, w, &pair.u, Quantity::SmallTilt(cutoff))?,
            )
        } else {
            (vec![0.0; n], vec![0.0; n])
        };
        let mut beta = Vec::with_capacity(n);
        let mut theta = Vec::with_capacity(n);
        let mut drift = Vec::with_capacity(n);
        for i in 0..n {
            let dt = grid.dt(i);
            let clock = lc.scale()[i] * dt;
            let b = pair.beta.at(i);
            // Exponential tilt of the small-jump Gaussian that reproduces its
            // compensated mean shift under the new measure.
            let th = if var[i] > 0.0 { tilt[i] / var[i] } else { 0.0 };
            let v = clock * var[i];
            beta.push(b);
            theta.push(th);
            drift.push(-0.5 * b * b * lc.diffusion()[i] * dt - clock * comp[i] - 0.5 * th * th * v);
        }
        Ok(DensityCoeffs {
            beta,
            theta,
            drift,
            identity_u,
        })
    }

    /// `ln Z_T` only.
    pub(crate) fn log_terminal(
        &self,
        pair: &GirsanovPair,
        path: &SimPath,
    ) -> Result<f64, VerifyError> {
        let dec = path
            .decomposition
            .as_ref()
            .ok_or(VerifyError::MissingDecomposition)?;
        let mut log_z = 0.0;
        for i in 0..self.beta.len() {
            log_z += self.beta[i] * dec.continuous[i] + self.theta[i] * dec.small[i] + self.drift[i];
        }
        if !self.identity_u {
            for j in &dec.jumps {
                let u = pair.u.eval(j.cell, j.size);
                if !(u > 0.0) {
                    return Err(VerifyError::NonPositiveDensity { cell: j.cell });
                }
                log_z += u.ln();
            }
        }
        Ok(log_z)
    }

    pub(crate) fn path(&self, pair: &GirsanovPair, path: &SimPath) -> Result<DensityPath, VerifyError> {
        let dec = path
            .decomposition
            .as_ref()
            .ok_or(VerifyError::MissingDecomposition)?;
        let n = self.beta.len();
        let mut jump_log = vec![0.0; n];
        if !self.identity_u {
            for j in &dec.jumps {
                let u = pair.u.eval(j.cell, j.size);
                if !(u > 0.0) {
                    return Err(VerifyError::NonPositiveDensity { cell: j.cell });
                }
                jump_log[j.cell] += u.ln();
            }
        }
        let mut values = Vec::with_capacity(n + 1);
        values.push(1.0);
        let mut log_z = 0.0;
        for i in 0..n {
            log_z += self.beta[i] * dec.continuous[i]
                + self.theta[i] * dec.small[i]
                + self.drift[i]
                + jump_log[i];
            let z = log_z.exp();
            if !(z > 0.0) {
                return Err(VerifyError::NonPositiveDensity { cell: i });
            }
            values.push(z);
        }
        Ok(DensityPath { values })
    }
}

/// Discretized density process
/// `Z = exp(β·X^c − ½β²·C − (U − 1)W·ν) · Π U(ΔX)` along a simulated path,
/// with the small-jump Gaussian reweighted by an exact Gaussian tilt.
pub fn density_process(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    path: &SimPath,
) -> Result<DensityPath, VerifyError> {
    let dec = path
        .decomposition
        .as_ref()
        .ok_or(VerifyError::MissingDecomposition)?;
    DensityCoeffs::new(lc, pair, dec.cutoff)?.path(pair, path)
}
