//! Monte Carlo verification that a Girsanov pair defines an equivalent
//! martingale measure: `E_P[Z_T] = 1` and `E_Q[e^{X_T}] = 1`, the latter both
//! by reweighting with `Z` and by simulating the modified characteristics.

mod density;
mod engine;
mod oracle;

use serde::Serialize;
use thiserror::Error;

use crate::characteristics::CharacteristicsError;
use crate::girsanov::GirsanovError;
use crate::levy::LevyError;
use crate::models::ModelError;

pub use density::{density_process, DensityPath};
pub use engine::{
    verify_density_martingale, verify_q_martingale_direct, verify_q_martingale_via_density,
    ConsistencyReport, FactorScenario, FixedScenario, McEngine, Realization, Scenario,
    DRIFT_ASSERTION_TOL,
};
pub use oracle::{conditional_oracle, poisson_series_oracle, SeriesOracle};

/// Default acceptance band in standard errors.
pub const DEFAULT_BAND_SE: f64 = 3.0;
/// Default number of Monte Carlo paths.
pub const DEFAULT_PATHS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("simulated path carries no continuous/jump decomposition")]
    MissingDecomposition,
    #[error("pair does not solve the MPRE: martingale drift rate {residual:e} on cell {cell}")]
    DriftAssertionFailed { cell: usize, residual: f64 },
    #[error("exponential moment ∫_(x>1) e^x F(dx) is infinite")]
    ExponentialMomentInfinite,
    #[error("density process hits zero on cell {cell} (U vanishes at a jump)")]
    NonPositiveDensity { cell: usize },
    #[error("oracle does not apply: {0}")]
    OracleUnsupported(String),
    #[error("invalid Monte Carlo settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Girsanov(GirsanovError),
    #[error(transparent)]
    Levy(LevyError),
    #[error(transparent)]
    Characteristics(#[from] CharacteristicsError),
}

impl From<GirsanovError> for VerifyError {
    fn from(e: GirsanovError) -> Self {
        match e {
            GirsanovError::ExponentialMomentInfinite => VerifyError::ExponentialMomentInfinite,
            e => VerifyError::Girsanov(e),
        }
    }
}

impl From<LevyError> for VerifyError {
    fn from(e: LevyError) -> Self {
        match e {
            LevyError::ExponentialMomentInfinite => VerifyError::ExponentialMomentInfinite,
            e => VerifyError::Levy(e),
        }
    }
}

/// Monte Carlo estimate of an expectation with a known target.
///
/// A pass means the sample is consistent with the target, which supports
/// (but cannot certify) the martingale property being tested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub target: f64,
    pub band_se: f64,
    pub pass: bool,
}

impl McReport {
    /// Sample mean and standard error of the mean. With zero spread the
    /// estimate has to match the target to 1e−12.
    pub fn from_samples(samples: &[f64], seed: u64, target: f64, band_se: f64) -> Self {
        let (estimate, std_error) = mean_and_se(samples);
        let pass = if std_error == 0.0 {
            (estimate - target).abs() <= 1e-12
        } else {
            (estimate - target).abs() <= band_se * std_error
        };
        McReport {
            estimate,
            std_error,
            n_paths: samples.len(),
            seed,
            target,
            band_se,
            pass: pass && estimate.is_finite(),
        }
    }

    /// Number of standard errors between estimate and target.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            0.0
        } else {
            (self.estimate - self.target) / self.std_error
        }
    }
}

/// Sequential mean and standard error, so results do not depend on thread
/// scheduling.
pub(crate) fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0) / n).sqrt())
}
