//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use spemm::levy::{LevyMeasure, LevyTriplet};
use spemm::verify::{DEFAULT_BAND_SE, DEFAULT_PATHS};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub measure: MeasureConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `dX = γ(Y) dt + σ(Y) dW`.
    BsFactor {
        factor: FactorConfig,
        gamma: Affine,
        sigma: SigmaConfig,
    },
    /// Lévy process run on the clock `∫ Y ds`, plus drift `μ dt`.
    #[serde(alias = "time_change")]
    CgmyOu {
        #[serde(default)]
        mu: f64,
        triplet: LevyTriplet,
        factor: FactorConfig,
    },
    /// Deterministic per-cell characteristics.
    CustomLc {
        drift: Values,
        diffusion: Values,
        #[serde(default)]
        scale: Option<Values>,
        #[serde(default)]
        measure: Option<LevyMeasure>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorConfig {
    Constant {
        value: f64,
    },
    /// OU process driven by compound Poisson with exponential jumps.
    Ou {
        y0: f64,
        lambda: f64,
        rate: f64,
        mean_jump: f64,
    },
    /// `level + scale · B^H`.
    Fbm {
        hurst: f64,
        #[serde(default)]
        level: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// CSV with columns `t,y` on the configured grid.
    Csv {
        path: PathBuf,
    },
}

/// `a + b·y`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

impl Affine {
    pub fn eval(&self, y: f64) -> f64 {
        self.a + self.b * y
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaConfig {
    /// `a + b·y`; must stay positive along the factor path.
    Affine {
        a: f64,
        #[serde(default)]
        b: f64,
    },
    /// `a·exp(b·y)`.
    Exp {
        a: f64,
        #[serde(default)]
        b: f64,
    },
}

impl SigmaConfig {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            SigmaConfig::Affine { a, b } => a + b * y,
            SigmaConfig::Exp { a, b } => a * (b * y).exp(),
        }
    }
}

/// A scalar, or one value per cell.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Scalar(f64),
    PerCell(Vec<f64>),
}

impl Values {
    pub fn expand(&self, cells: usize, name: &str) -> Result<Vec<f64>, CliError> {
        match self {
            Values::Scalar(v) => Ok(vec![*v; cells]),
            Values::PerCell(v) if v.len() == cells => Ok(v.clone()),
            Values::PerCell(v) => Err(CliError::Config(format!(
                "{name} has {} values for {cells} cells",
                v.len()
            ))),
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            Values::Scalar(v) => Some(*v),
            Values::PerCell(_) => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub variant: MeasureKind,
    /// Added to `β` on every cell after construction. Nonzero values break
    /// the MPRE on purpose.
    #[serde(default)]
    pub beta_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Identity,
    ExplicitBeta,
    Esscher,
    #[serde(rename = "cgmy_ou_1")]
    CgmyOu1,
    #[serde(rename = "cgmy_ou_2")]
    CgmyOu2,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub band_se: f64,
    /// Small-jump cutoff for infinite-activity measures.
    pub cutoff: f64,
    /// Factor paths sampled by `check` for random-factor models.
    pub check_paths: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: DEFAULT_PATHS,
            seed: 0,
            band_se: DEFAULT_BAND_SE,
            cutoff: spemm::models::DEFAULT_CUTOFF,
            check_paths: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub mpre: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mpre: spemm::girsanov::DEFAULT_MPRE_TOL,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// A parsed config together with the SHA-256 of its raw bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
}

impl LoadedConfig {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_slice(bytes)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        let hash = Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(LoadedConfig { config, hash })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
