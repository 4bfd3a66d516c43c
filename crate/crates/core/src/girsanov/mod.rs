//! Girsanov pairs `(β, U)`, the market price of risk equation (MPRE) in
//! per-cell rate form, and the characteristics under the new measure.
//!
//! Compensators are assumed quasi-left-continuous (no fixed-time atoms), so
//! every pair is fully described by a per-cell `β` and a jump weight `U`.

mod admissibility;
mod cgmy_ou;
mod esscher;

use thiserror::Error;

use crate::characteristics::{CharacteristicsError, FactorPath, LocalCharacteristics};
use crate::levy::{CellValues, JumpWeight, LevyError, Quantity};

pub use admissibility::{
    admissibility_check, bs_factor_mpre_condition, hellinger_process, AdmissibilityReport,
    HellingerVerdict, MpreCondition, DEFAULT_MPRE_TOL,
};
pub use cgmy_ou::{cgmy_ou_pair_case1, cgmy_ou_pair_case2, CgmyOuCase1, CgmyOuCase2};
pub use esscher::esscher_pair;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GirsanovError {
    #[error("diffusion coefficient vanishes on cell {cell}; the MPRE needs a jump reweighting")]
    ZeroDiffusion { cell: usize },
    #[error("Esscher equation has no root on cell {cell}")]
    NoRoot { cell: usize },
    #[error("∫(1 ∧ |x|) F(dx) is infinite")]
    InfiniteVariationMeasure,
    #[error("jump measure needs mass on both tails (F(1,∞) = {up}, F(−∞,−1) = {down})")]
    OneSidedJumps { up: f64, down: f64 },
    #[error("diffusion coefficient must be {expected} for this construction, got {got}")]
    DiffusionMismatch { expected: &'static str, got: f64 },
    #[error("factor must be strictly positive, got {value} at grid index {index}")]
    NonPositiveFactor { index: usize, value: f64 },
    #[error("exponential moment ∫_(x>1) e^x F(dx) is infinite")]
    ExponentialMomentInfinite,
    #[error(transparent)]
    Levy(LevyError),
    #[error(transparent)]
    Characteristics(#[from] CharacteristicsError),
}

impl From<LevyError> for GirsanovError {
    fn from(e: LevyError) -> Self {
        match e {
            LevyError::ExponentialMomentInfinite => GirsanovError::ExponentialMomentInfinite,
            e => GirsanovError::Levy(e),
        }
    }
}

/// Per-cell `β` and jump weight `U`, both functions of the factor path,
/// the cell and the jump size only.
#[derive(Debug, Clone)]
pub struct GirsanovPair {
    pub beta: CellValues,
    pub u: JumpWeight,
}

impl GirsanovPair {
    /// `β ≡ 0`, `U ≡ 1`.
    pub fn identity() -> Self {
        GirsanovPair {
            beta: CellValues::constant(0.0),
            u: JumpWeight::Identity,
        }
    }

    pub fn new(beta: Vec<f64>, u: JumpWeight) -> Self {
        GirsanovPair {
            beta: CellValues::per_cell(beta),
            u,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.beta.values().iter().all(|b| *b == 0.0) && self.u.is_identity()
    }

    /// Adds `delta` to every `β_i`.
    pub fn shift_beta(&self, delta: f64) -> Self {
        GirsanovPair {
            beta: CellValues::per_cell(self.beta.values().iter().map(|b| b + delta).collect()),
            u: self.u.clone(),
        }
    }

    pub fn beta_at(&self, cell: usize) -> f64 {
        self.beta.at(cell)
    }
}

/// `r_i = b_i + (β_i + ½) c_i + s_i ∫((e^x − 1) U − h) W dF` for every cell.
pub fn mpre_residuals(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
) -> Result<Vec<f64>, GirsanovError> {
    let jumps = lc.jump_integrals(&pair.u, Quantity::Mpre)?;
    Ok((0..lc.cells())
        .map(|i| {
            lc.drift()[i]
                + (pair.beta.at(i) + 0.5) * lc.diffusion()[i]
                + lc.scale()[i] * jumps[i]
        })
        .collect())
}

/// MPRE residual on one cell.
pub fn mpre_residual(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    cell: usize,
) -> Result<f64, GirsanovError> {
    let jumps = if lc.scale()[cell] == 0.0 {
        0.0
    } else {
        lc.kernel()
            .integral(cell, lc.weight(), &pair.u, Quantity::Mpre)?
    };
    Ok(lc.drift()[cell]
        + (pair.beta.at(cell) + 0.5) * lc.diffusion()[cell]
        + lc.scale()[cell] * jumps)
}

/// Solves the MPRE for `β` given the jump weight `U`:
/// `β_i = −(½c_i + b_i + s_i ∫((e^x − 1)U − h) W dF) / c_i`.
pub fn solve_beta(lc: &LocalCharacteristics, u: &JumpWeight) -> Result<GirsanovPair, GirsanovError> {
    if let Some(cell) = lc.diffusion().iter().position(|c| *c == 0.0) {
        return Err(GirsanovError::ZeroDiffusion { cell });
    }
    let jumps = lc.jump_integrals(u, Quantity::Mpre)?;
    let beta = (0..lc.cells())
        .map(|i| {
            let c = lc.diffusion()[i];
            -(0.5 * c + lc.drift()[i] + lc.scale()[i] * jumps[i]) / c
        })
        .collect();
    Ok(GirsanovPair::new(beta, u.clone()))
}

/// Characteristics under the measure defined by `pair`:
/// `b^Q = b + βc + s ∫h(U − 1) W dF`, `c^Q = c`, jump weight `W U`.
pub fn modified_characteristics(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
) -> Result<LocalCharacteristics, GirsanovError> {
    let shift = lc.jump_integrals(&pair.u, Quantity::DriftShift)?;
    let drift = (0..lc.cells())
        .map(|i| {
            lc.drift()[i] + pair.beta.at(i) * lc.diffusion()[i] + lc.scale()[i] * shift[i]
        })
        .collect();
    Ok(lc.with_drift_and_weight(drift, lc.weight().times(&pair.u)))
}

/// `b_i + ½c_i + s_i ∫(e^x − 1 − h) W dF`; zero on every cell iff `e^X` is a
/// martingale given the factor path.
pub fn martingale_drift_rate(lc: &LocalCharacteristics) -> Result<Vec<f64>, GirsanovError> {
    let jumps = if lc.has_jumps() {
        if lc.weight().is_identity() && !lc.kernel().measure().exponential_moment_finite() {
            return Err(GirsanovError::ExponentialMomentInfinite);
        }
        lc.jump_integrals(&JumpWeight::Identity, Quantity::ExpCompensator)
            .map_err(|e| match e {
                LevyError::Divergent(_) => GirsanovError::ExponentialMomentInfinite,
                e => e.into(),
            })?
    } else {
        vec![0.0; lc.cells()]
    };
    Ok((0..lc.cells())
        .map(|i| lc.drift()[i] + 0.5 * lc.diffusion()[i] + lc.scale()[i] * jumps[i])
        .collect())
}

/// `(β, U ≡ 1)` with `β` from [`solve_beta`].
pub fn explicit_beta_pair(lc: &LocalCharacteristics) -> Result<GirsanovPair, GirsanovError> {
    solve_beta(lc, &JumpWeight::Identity)
}

/// Left-point factor values `Y_{i−}` checked for strict positivity.
pub(crate) fn positive_left_values(path: &FactorPath) -> Result<&[f64], GirsanovError> {
    let n = path.grid().cells();
    let left = &path.values()[..n];
    if let Some((index, &value)) = left.iter().enumerate().find(|(_, y)| !(**y > 0.0)) {
        return Err(GirsanovError::NonPositiveFactor { index, value });
    }
    Ok(left)
}
