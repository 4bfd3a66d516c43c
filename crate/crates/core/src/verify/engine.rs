use std::sync::{Arc, OnceLock};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::{FactorPath, LocalCharacteristics};
use crate::girsanov::{martingale_drift_rate, modified_characteristics, GirsanovPair};
use crate::models::{HsiiSimulator, RngSpec, SimPath, DEFAULT_CUTOFF};

use super::density::{DensityCoeffs, DensityPath};
use super::{mean_and_se, McReport, VerifyError, DEFAULT_BAND_SE};

/// Largest admissible `|martingale drift rate|` under the new measure.
pub const DRIFT_ASSERTION_TOL: f64 = 1e-8;

/// Stream tags keep the P-side and Q-side draws of a path independent.
const STREAM_P: u64 = 0;
const STREAM_Q: u64 = 1;

struct PSide {
    sim: HsiiSimulator,
    density: DensityCoeffs,
    exp_moments: Result<(), VerifyError>,
}

/// Characteristics and pair for one factor path, with simulators built on
/// first use.
pub struct Realization {
    pub lc: LocalCharacteristics,
    pub pair: GirsanovPair,
    pub factor: Option<FactorPath>,
    cutoff: f64,
    p: OnceLock<Result<Arc<PSide>, VerifyError>>,
    q: OnceLock<Result<Arc<HsiiSimulator>, VerifyError>>,
}

impl Realization {
    pub fn new(
        lc: LocalCharacteristics,
        pair: GirsanovPair,
        factor: Option<FactorPath>,
        cutoff: f64,
    ) -> Self {
        Realization {
            lc,
            pair,
            factor,
            cutoff,
            p: OnceLock::new(),
            q: OnceLock::new(),
        }
    }

    fn p_side(&self) -> Result<Arc<PSide>, VerifyError> {
        self.p
            .get_or_init(|| {
                let sim = HsiiSimulator::new(&self.lc, self.cutoff)?;
                let density = DensityCoeffs::new(&self.lc, &self.pair, sim.cutoff())?;
                let exp_moments = martingale_drift_rate(&self.lc)
                    .map(|_| ())
                    .map_err(VerifyError::from);
                Ok(Arc::new(PSide {
                    sim,
                    density,
                    exp_moments,
                }))
            })
            .clone()
    }

    fn q_side(&self) -> Result<Arc<HsiiSimulator>, VerifyError> {
        self.q
            .get_or_init(|| {
                let q = modified_characteristics(&self.lc, &self.pair)?;
                let rates = martingale_drift_rate(&q)?;
                if let Some((cell, &residual)) = rates
                    .iter()
                    .enumerate()
                    .find(|(_, r)| !(r.abs() <= DRIFT_ASSERTION_TOL))
                {
                    return Err(VerifyError::DriftAssertionFailed { cell, residual });
                }
                Ok(Arc::new(HsiiSimulator::new(&q, self.cutoff)?))
            })
            .clone()
    }

    /// One path under P and its terminal density `Z_T`.
    pub fn sample_p(&self, rng: &mut ChaCha8Rng) -> Result<(SimPath, f64), VerifyError> {
        let p = self.p_side()?;
        let path = p.sim.sample(rng);
        let log_z = p.density.log_terminal(&self.pair, &path)?;
        Ok((path, log_z.exp()))
    }

    /// One path under P with its whole density process.
    pub fn sample_p_path(
        &self,
        rng: &mut ChaCha8Rng,
    ) -> Result<(SimPath, DensityPath), VerifyError> {
        let p = self.p_side()?;
        let path = p.sim.sample(rng);
        let z = p.density.path(&self.pair, &path)?;
        Ok((path, z))
    }

    /// One path under the modified characteristics.
    pub fn sample_q(&self, rng: &mut ChaCha8Rng) -> Result<SimPath, VerifyError> {
        Ok(self.q_side()?.sample(rng))
    }

    /// Errors unless `∫_{x>1} e^x dF` is finite for these characteristics.
    pub fn check_exponential_moments(&self) -> Result<(), VerifyError> {
        self.p_side()?.exp_moments.clone()
    }
}

/// Source of per-path characteristics and pairs.
pub trait Scenario: Sync {
    /// Draws whatever randomness the characteristics depend on (the factor
    /// path) from `rng`, which then continues to drive the log-price.
    fn realize(&self, rng: &mut ChaCha8Rng) -> Result<Arc<Realization>, VerifyError>;
}

/// Deterministic characteristics shared by every path.
#[derive(Clone)]
pub struct FixedScenario(Arc<Realization>);

impl FixedScenario {
    pub fn new(lc: LocalCharacteristics, pair: GirsanovPair, cutoff: f64) -> Self {
        FixedScenario(Arc::new(Realization::new(lc, pair, None, cutoff)))
    }

    pub fn realization(&self) -> &Realization {
        &self.0
    }
}

impl Scenario for FixedScenario {
    fn realize(&self, _: &mut ChaCha8Rng) -> Result<Arc<Realization>, VerifyError> {
        Ok(self.0.clone())
    }
}

/// A random factor path per Monte Carlo path; characteristics and pair are
/// built from it.
pub struct FactorScenario<F, B> {
    sample_factor: F,
    build: B,
    cutoff: f64,
}

impl<F, B> FactorScenario<F, B>
where
    F: Fn(&mut ChaCha8Rng) -> Result<FactorPath, VerifyError> + Sync,
    B: Fn(&FactorPath) -> Result<(LocalCharacteristics, GirsanovPair), VerifyError> + Sync,
{
    pub fn new(sample_factor: F, build: B, cutoff: f64) -> Self {
        FactorScenario {
            sample_factor,
            build,
            cutoff,
        }
    }
}

impl<F, B> Scenario for FactorScenario<F, B>
where
    F: Fn(&mut ChaCha8Rng) -> Result<FactorPath, VerifyError> + Sync,
    B: Fn(&FactorPath) -> Result<(LocalCharacteristics, GirsanovPair), VerifyError> + Sync,
{
    fn realize(&self, rng: &mut ChaCha8Rng) -> Result<Arc<Realization>, VerifyError> {
        let factor = (self.sample_factor)(rng)?;
        let (lc, pair) = (self.build)(&factor)?;
        Ok(Arc::new(Realization::new(lc, pair, Some(factor), self.cutoff)))
    }
}

/// Difference of two independent estimates of the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub first: f64,
    pub first_se: f64,
    pub second: f64,
    pub second_se: f64,
    pub difference: f64,
    pub combined_se: f64,
    pub band_se: f64,
    pub pass: bool,
}

impl ConsistencyReport {
    pub fn new(first: (f64, f64), second: (f64, f64), band_se: f64) -> Self {
        let difference = first.0 - second.0;
        let combined_se = first.1.hypot(second.1);
        let pass = if combined_se == 0.0 {
            difference.abs() <= 1e-12
        } else {
            difference.abs() <= band_se * combined_se
        };
        ConsistencyReport {
            first: first.0,
            first_se: first.1,
            second: second.0,
            second_se: second.1,
            difference,
            combined_se,
            band_se,
            pass: pass && difference.is_finite(),
        }
    }

    pub fn from_reports(a: &McReport, b: &McReport, band_se: f64) -> Self {
        Self::new((a.estimate, a.std_error), (b.estimate, b.std_error), band_se)
    }
}

/// Monte Carlo settings. Path `i` draws from stream `i` of `seed`; results
/// are bit-identical regardless of the number of threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEngine {
    pub n_paths: usize,
    pub seed: u64,
    pub band_se: f64,
}

impl McEngine {
    pub fn new(n_paths: usize, seed: u64) -> Result<Self, VerifyError> {
        Self::with_band(n_paths, seed, DEFAULT_BAND_SE)
    }

    pub fn with_band(n_paths: usize, seed: u64, band_se: f64) -> Result<Self, VerifyError> {
        if n_paths < 2 {
            return Err(VerifyError::InvalidSettings(
                "at least two paths are needed for a standard error".into(),
            ));
        }
        if !(band_se > 0.0 && band_se.is_finite()) {
            return Err(VerifyError::InvalidSettings("band must be positive".into()));
        }
        Ok(McEngine {
            n_paths,
            seed,
            band_se,
        })
    }

    /// Evaluates `f` on every path in parallel, in path order.
    pub fn collect<S, T, F>(&self, scenario: &S, q_side: bool, f: F) -> Result<Vec<T>, VerifyError>
    where
        S: Scenario + ?Sized,
        T: Send,
        F: Fn(&Realization, &mut ChaCha8Rng) -> Result<T, VerifyError> + Sync,
    {
        let tag = if q_side { STREAM_Q } else { STREAM_P };
        (0..self.n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngSpec::new(self.seed, (tag << 40) | i).rng();
                let r = scenario.realize(&mut rng)?;
                f(&r, &mut rng)
            })
            .collect()
    }

    fn report(&self, samples: &[f64], target: f64) -> McReport {
        McReport::from_samples(samples, self.seed, target, self.band_se)
    }

    /// `E_P[Z_T] = 1`.
    pub fn density_martingale<S: Scenario + ?Sized>(&self, s: &S) -> Result<McReport, VerifyError> {
        let z = self.collect(s, false, |r, rng| Ok(r.sample_p(rng)?.1))?;
        Ok(self.report(&z, 1.0))
    }

    /// `E_P[Z_T e^{X_T}] = 1`.
    pub fn q_martingale_via_density<S: Scenario + ?Sized>(
        &self,
        s: &S,
    ) -> Result<McReport, VerifyError> {
        let v = self.collect(s, false, |r, rng| {
            r.check_exponential_moments()?;
            let (path, z) = r.sample_p(rng)?;
            Ok(z * path.terminal().exp())
        })?;
        Ok(self.report(&v, 1.0))
    }

    /// `E_Q[e^{X_T}] = 1` simulating the modified characteristics, after
    /// asserting that their martingale drift rate vanishes on every cell.
    pub fn q_martingale_direct<S: Scenario + ?Sized>(&self, s: &S) -> Result<McReport, VerifyError> {
        let v = self.collect(s, true, |r, rng| Ok(r.sample_q(rng)?.terminal().exp()))?;
        Ok(self.report(&v, 1.0))
    }

    /// `E_P[Z_T φ]` against `E_Q[φ]` from independent draws.
    pub fn reweighting_consistency<S, P>(&self, s: &S, phi: P) -> Result<ConsistencyReport, VerifyError>
    where
        S: Scenario + ?Sized,
        P: Fn(&SimPath) -> f64 + Sync,
    {
        let p = self.collect(s, false, |r, rng| {
            let (path, z) = r.sample_p(rng)?;
            Ok(z * phi(&path))
        })?;
        let q = self.collect(s, true, |r, rng| Ok(phi(&r.sample_q(rng)?)))?;
        Ok(ConsistencyReport::new(
            mean_and_se(&p),
            mean_and_se(&q),
            self.band_se,
        ))
    }
}

fn fixed_run<F>(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    n_paths: usize,
    seed: u64,
    run: F,
) -> Result<McReport, VerifyError>
where
    F: Fn(&McEngine, &FixedScenario) -> Result<McReport, VerifyError>,
{
    let engine = McEngine::new(n_paths, seed)?;
    let scenario = FixedScenario::new(lc.clone(), pair.clone(), DEFAULT_CUTOFF);
    run(&engine, &scenario)
}

/// `E_P[Z_T] = 1` for fixed characteristics.
pub fn verify_density_martingale(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    n_paths: usize,
    seed: u64,
) -> Result<McReport, VerifyError> {
    fixed_run(lc, pair, n_paths, seed, |e, s| e.density_martingale(s))
}

/// `E_P[Z_T e^{X_T}] = 1` for fixed characteristics.
pub fn verify_q_martingale_via_density(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    n_paths: usize,
    seed: u64,
) -> Result<McReport, VerifyError> {
    fixed_run(lc, pair, n_paths, seed, |e, s| e.q_martingale_via_density(s))
}

/// `E_Q[e^{X_T}] = 1` under the modified characteristics.
pub fn verify_q_martingale_direct(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    n_paths: usize,
    seed: u64,
) -> Result<McReport, VerifyError> {
    fixed_run(lc, pair, n_paths, seed, |e, s| e.q_martingale_direct(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::TimeGrid;
    use crate::girsanov::explicit_beta_pair;
    use crate::levy::LevyTriplet;

    fn bs() -> LocalCharacteristics {
        let t = LevyTriplet::diffusion(0.05, 0.04).unwrap();
        LocalCharacteristics::levy(TimeGrid::uniform(1.0, 10).unwrap(), &t).unwrap()
    }

    #[test]
    fn identity_pair_is_exact() {
        let r = verify_density_martingale(&bs(), &GirsanovPair::identity(), 1000, 1).unwrap();
        assert_eq!((r.estimate, r.std_error), (1.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn single_path_is_rejected() {
        assert!(matches!(
            verify_density_martingale(&bs(), &GirsanovPair::identity(), 1, 1),
            Err(VerifyError::InvalidSettings(_))
        ));
    }

    #[test]
    fn broken_beta_trips_the_drift_assertion() {
        let lc = bs();
        let pair = explicit_beta_pair(&lc).unwrap().shift_beta(0.1);
        match verify_q_martingale_direct(&lc, &pair, 100, 1) {
            Err(VerifyError::DriftAssertionFailed { residual, .. }) => {
                assert!((residual - 0.1 * 0.04).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn results_are_reproducible() {
        let lc = bs();
        let pair = explicit_beta_pair(&lc).unwrap();
        let a = verify_q_martingale_via_density(&lc, &pair, 2000, 9).unwrap();
        let b = verify_q_martingale_via_density(&lc, &pair, 2000, 9).unwrap();
        assert_eq!(a, b);
    }
}
