//! Turns a validated config into characteristics and pairs, one factor path
//! at a time.

use std::fs::File;
use std::sync::{Arc, OnceLock};

use spemm::characteristics::{
    bs_factor_characteristics, FactorPath, LocalCharacteristics, TimeChange, TimeGrid,
};
use spemm::girsanov::{
    bs_factor_mpre_condition, esscher_pair, explicit_beta_pair, CgmyOuCase1, CgmyOuCase2,
    GirsanovError, GirsanovPair, MpreCondition,
};
use spemm::levy::{JumpKernel, JumpWeight, LevyMeasure, LevyTriplet, DEFAULT_TOL};
use spemm::models::{ChaCha8Rng, FbmSampler, OuParams};
use spemm::verify::{Realization, Scenario, VerifyError};

use crate::config::{
    Affine, FactorConfig, MeasureConfig, MeasureKind, ModelConfig, RunConfig, SigmaConfig,
};
use crate::CliError;

enum Factor {
    None,
    Fixed(FactorPath),
    Ou(OuParams),
    Fbm {
        sampler: FbmSampler,
        level: f64,
        scale: f64,
    },
}

enum Kind {
    Bs {
        gamma: Affine,
        sigma: SigmaConfig,
    },
    TimeChange {
        tc: TimeChange,
        case1: Option<Result<CgmyOuCase1, GirsanovError>>,
        case2: Option<Result<CgmyOuCase2, GirsanovError>>,
    },
    Custom(LocalCharacteristics),
}

/// A model ready to produce characteristics and pairs.
pub struct PreparedModel {
    grid: TimeGrid,
    factor: Factor,
    kind: Kind,
    measure: MeasureConfig,
    cutoff: f64,
    fixed: OnceLock<Result<Arc<Realization>, VerifyError>>,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl PreparedModel {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let grid = TimeGrid::uniform(cfg.grid.horizon, cfg.grid.n_steps).map_err(config_err)?;
        let cutoff = cfg.mc.cutoff;
        if !(cutoff > 0.0 && cutoff <= 1.0) {
            return Err(CliError::Config("mc.cutoff must lie in (0, 1]".into()));
        }
        let uses_case = matches!(cfg.measure.variant, MeasureKind::CgmyOu1 | MeasureKind::CgmyOu2);
        let (factor, kind) = match &cfg.model {
            ModelConfig::BsFactor {
                factor,
                gamma,
                sigma,
            } => (
                load_factor(factor, &grid)?,
                Kind::Bs {
                    gamma: *gamma,
                    sigma: *sigma,
                },
            ),
            ModelConfig::CgmyOu {
                mu,
                triplet,
                factor,
            } => {
                let tc = TimeChange::new(*mu, triplet).map_err(config_err)?;
                let case1 = (cfg.measure.variant == MeasureKind::CgmyOu1)
                    .then(|| CgmyOuCase1::new(&tc));
                let case2 = (cfg.measure.variant == MeasureKind::CgmyOu2)
                    .then(|| CgmyOuCase2::new(&tc));
                (
                    load_factor(factor, &grid)?,
                    Kind::TimeChange { tc, case1, case2 },
                )
            }
            ModelConfig::CustomLc {
                drift,
                diffusion,
                scale,
                measure,
            } => {
                let n = grid.cells();
                let measure = measure.clone().unwrap_or(LevyMeasure::Zero);
                measure.validate().map_err(config_err)?;
                let scale = match scale {
                    Some(s) => s.expand(n, "scale")?,
                    None => vec![1.0; n],
                };
                let lc = LocalCharacteristics::new(
                    grid.clone(),
                    drift.expand(n, "drift")?,
                    diffusion.expand(n, "diffusion")?,
                    scale,
                    JumpKernel::new(measure, DEFAULT_TOL),
                    JumpWeight::Identity,
                )
                .map_err(config_err)?;
                (Factor::None, Kind::Custom(lc))
            }
        };
        if uses_case && !matches!(kind, Kind::TimeChange { .. }) {
            return Err(CliError::Config(
                "measures cgmy_ou_1 and cgmy_ou_2 need the cgmy_ou model".into(),
            ));
        }
        Ok(PreparedModel {
            grid,
            factor,
            kind,
            measure: cfg.measure.clone(),
            cutoff,
            fixed: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Whether characteristics change from path to path.
    pub fn is_random(&self) -> bool {
        matches!(self.factor, Factor::Ou(_) | Factor::Fbm { .. })
    }

    pub fn has_factor(&self) -> bool {
        !matches!(self.factor, Factor::None)
    }

    pub fn sample_factor(&self, rng: &mut ChaCha8Rng) -> Result<Option<FactorPath>, VerifyError> {
        Ok(match &self.factor {
            Factor::None => None,
            Factor::Fixed(p) => Some(p.clone()),
            Factor::Ou(p) => Some(p.sample(&self.grid, rng)?),
            Factor::Fbm {
                sampler,
                level,
                scale,
            } => {
                let b = sampler.sample(rng);
                let v = b.values().iter().map(|x| level + scale * x).collect();
                Some(FactorPath::new(self.grid.clone(), v)?)
            }
        })
    }

    pub fn characteristics(
        &self,
        factor: Option<&FactorPath>,
    ) -> Result<LocalCharacteristics, VerifyError> {
        match (&self.kind, factor) {
            (Kind::Custom(lc), _) => Ok(lc.clone()),
            (Kind::Bs { gamma, sigma }, Some(y)) => Ok(bs_factor_characteristics(
                |p, t| gamma.eval(p.value_at(t)),
                |p, t| sigma.eval(p.value_at(t)),
                y,
            )?),
            (Kind::TimeChange { tc, .. }, Some(y)) => Ok(tc.characteristics(y)?),
            _ => unreachable!("factor models always sample a factor path"),
        }
    }

    pub fn pair(
        &self,
        lc: &LocalCharacteristics,
        factor: Option<&FactorPath>,
    ) -> Result<GirsanovPair, VerifyError> {
        let pair = match self.measure.variant {
            MeasureKind::Identity => GirsanovPair::identity(),
            MeasureKind::ExplicitBeta => explicit_beta_pair(lc)?,
            MeasureKind::Esscher => esscher_pair(lc)?,
            MeasureKind::CgmyOu1 => match (&self.kind, factor) {
                (Kind::TimeChange { case1: Some(c), .. }, Some(y)) => {
                    c.as_ref().map_err(|e| e.clone())?.pair(y)?
                }
                _ => unreachable!("checked when the config was loaded"),
            },
            MeasureKind::CgmyOu2 => match (&self.kind, factor) {
                (Kind::TimeChange { case2: Some(c), .. }, Some(y)) => {
                    c.as_ref().map_err(|e| e.clone())?.pair(y)?
                }
                _ => unreachable!("checked when the config was loaded"),
            },
        };
        Ok(if self.measure.beta_shift != 0.0 {
            pair.shift_beta(self.measure.beta_shift)
        } else {
            pair
        })
    }

    /// `∫(γ/σ)² ds` along the factor path, for the diffusion factor model.
    pub fn bs_condition(&self, factor: Option<&FactorPath>) -> Option<MpreCondition> {
        match (&self.kind, factor) {
            (Kind::Bs { gamma, sigma }, Some(y)) => Some(bs_factor_mpre_condition(
                |p, t| gamma.eval(p.value_at(t)),
                |p, t| sigma.eval(p.value_at(t)),
                y,
            )),
            _ => None,
        }
    }

    pub fn realization(&self, factor: Option<FactorPath>) -> Result<Realization, VerifyError> {
        let lc = self.characteristics(factor.as_ref())?;
        let pair = self.pair(&lc, factor.as_ref())?;
        Ok(Realization::new(lc, pair, factor, self.cutoff))
    }

    /// The Lévy triplet whose exponent `exponent` reports.
    pub fn triplet(&self) -> Result<LevyTriplet, CliError> {
        match &self.kind {
            Kind::TimeChange { tc, .. } => Ok(tc.triplet()),
            Kind::Custom(lc) => {
                let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
                if !(constant(lc.drift()) && constant(lc.diffusion()))
                    || lc.scale().iter().any(|s| *s != 1.0)
                {
                    return Err(CliError::Config(
                        "exponent needs constant drift and diffusion and unit scale".into(),
                    ));
                }
                LevyTriplet::new(lc.drift()[0], lc.diffusion()[0], lc.kernel().measure().clone())
                    .map_err(config_err)
            }
            Kind::Bs { .. } => Err(CliError::Config(
                "the factor diffusion model has no Lévy exponent".into(),
            )),
        }
    }
}

impl Scenario for PreparedModel {
    fn realize(&self, rng: &mut ChaCha8Rng) -> Result<Arc<Realization>, VerifyError> {
        if self.is_random() {
            let factor = self.sample_factor(rng)?;
            return Ok(Arc::new(self.realization(factor)?));
        }
        self.fixed
            .get_or_init(|| {
                let factor = self.sample_factor(rng)?;
                Ok(Arc::new(self.realization(factor)?))
            })
            .clone()
    }
}

fn load_factor(cfg: &FactorConfig, grid: &TimeGrid) -> Result<Factor, CliError> {
    Ok(match cfg {
        FactorConfig::Constant { value } => {
            Factor::Fixed(FactorPath::constant(grid.clone(), *value).map_err(config_err)?)
        }
        FactorConfig::Ou {
            y0,
            lambda,
            rate,
            mean_jump,
        } => Factor::Ou(
            OuParams::exponential_jumps(*y0, *lambda, *rate, *mean_jump).map_err(config_err)?,
        ),
        FactorConfig::Fbm {
            hurst,
            level,
            scale,
        } => Factor::Fbm {
            sampler: FbmSampler::new(*hurst, grid).map_err(config_err)?,
            level: *level,
            scale: *scale,
        },
        FactorConfig::Csv { path } => {
            let f = File::open(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let p = FactorPath::read_csv(f).map_err(config_err)?;
            let same = p.grid().len() == grid.len()
                && p
                    .grid()
                    .times()
                    .iter()
                    .zip(grid.times())
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
            if !same {
                return Err(CliError::Config(format!(
                    "factor path in {} is not on the configured grid",
                    path.display()
                )));
            }
            Factor::Fixed(FactorPath::new(grid.clone(), p.values().to_vec()).map_err(config_err)?)
        }
    })
}
