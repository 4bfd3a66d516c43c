//! Monte Carlo checks of the density process and the modified
//! characteristics, against each other and against exact oracles.

use std::sync::Arc;

use spemm::characteristics::{FactorPath, LocalCharacteristics, TimeChange, TimeGrid};
use spemm::girsanov::{esscher_pair, explicit_beta_pair, CgmyOuCase1, GirsanovPair};
use spemm::levy::{CellValues, JumpWeight, LevyMeasure, LevyTriplet};
use spemm::models::{OuParams, SimPath};
use spemm::verify::{
    density_process, poisson_series_oracle, FactorScenario, FixedScenario, McEngine, McReport,
    VerifyError,
};

const N: usize = 20_000;

fn esscher_cgmy() -> FixedScenario {
    let t = LevyTriplet::new(0.05, 0.02, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5)).unwrap();
    let lc = LocalCharacteristics::levy(TimeGrid::uniform(1.0, 10).unwrap(), &t).unwrap();
    let pair = esscher_pair(&lc).unwrap();
    FixedScenario::new(lc, pair, 1e-3)
}

fn time_changed_case1(
    n_steps: usize,
) -> FactorScenario<
    impl Fn(&mut spemm::models::ChaCha8Rng) -> Result<FactorPath, VerifyError> + Sync,
    impl Fn(&FactorPath) -> Result<(LocalCharacteristics, GirsanovPair), VerifyError> + Sync,
> {
    let t = LevyTriplet::new(0.0, 0.04, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5)).unwrap();
    let tc = Arc::new(TimeChange::new(0.01, &t).unwrap());
    let case1 = CgmyOuCase1::new(&tc).unwrap();
    let ou = OuParams::exponential_jumps(1.0, 2.0, 1.5, 0.5).unwrap();
    let grid = TimeGrid::uniform(1.0, n_steps).unwrap();
    FactorScenario::new(
        move |rng| Ok(ou.sample(&grid, rng)?),
        move |y| {
            let lc = tc.characteristics(y)?;
            Ok((lc, case1.pair(y)?))
        },
        1e-3,
    )
}

fn positive(p: &SimPath) -> f64 {
    f64::from(p.terminal() > 0.0)
}

fn capped(p: &SimPath) -> f64 {
    p.terminal().exp().min(10.0)
}

#[test]
fn reweighted_and_direct_expectations_agree() {
    let engine = McEngine::new(N, 11).unwrap();
    let fixed = esscher_cgmy();
    let factor = time_changed_case1(20);
    for phi in [positive as fn(&SimPath) -> f64, capped] {
        let a = engine.reweighting_consistency(&fixed, phi).unwrap();
        assert!(a.pass, "{a:?}");
        let b = engine.reweighting_consistency(&factor, phi).unwrap();
        assert!(b.pass, "{b:?}");
    }
}

#[test]
fn martingale_checks_survive_grid_refinement() {
    for n in [10, 40] {
        let engine = McEngine::new(N, 3).unwrap();
        let s = time_changed_case1(n);
        for r in [
            engine.density_martingale(&s).unwrap(),
            engine.q_martingale_via_density(&s).unwrap(),
            engine.q_martingale_direct(&s).unwrap(),
        ] {
            assert!(r.pass, "n={n}: {r:?}");
        }
    }
}

#[test]
fn poisson_series_matches_reweighting_off_the_mpre() {
    let t = LevyTriplet::new(0.02, 0.04, LevyMeasure::atomic(&[(0.4, 0.3), (-0.6, 0.2)])).unwrap();
    let lc = LocalCharacteristics::levy(TimeGrid::uniform(1.0, 8).unwrap(), &t).unwrap();
    // Neither pair solves the MPRE, so the target differs from 1.
    for pair in [
        GirsanovPair::new(vec![0.5; 8], JumpWeight::exponential(0.4)),
        GirsanovPair::new(
            vec![-2.0; 8],
            JumpWeight::Piecewise {
                lower: CellValues::constant(2.0),
                upper: CellValues::constant(0.7),
            },
        ),
    ] {
        let oracle = poisson_series_oracle(&lc, &pair, 10).unwrap();
        assert!(oracle.tail_bound < 1e-8);
        assert!((oracle.value - 1.0).abs() > 0.01);
        let engine = McEngine::new(N, 5).unwrap();
        let s = FixedScenario::new(lc.clone(), pair, 1e-3);
        let v = engine
            .collect(&s, false, |r, rng| {
                let (p, z) = r.sample_p(rng)?;
                Ok(z * p.terminal().exp())
            })
            .unwrap();
        let rep = McReport::from_samples(&v, 5, oracle.value, 3.0);
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn density_paths_are_positive_and_start_at_one() {
    let s = esscher_cgmy();
    let engine = McEngine::new(200, 1).unwrap();
    let zs = engine
        .collect(&s, false, |r, rng| {
            let (path, z) = r.sample_p_path(rng)?;
            let again = density_process(&r.lc, &r.pair, &path)?;
            assert_eq!(again, z);
            Ok(z)
        })
        .unwrap();
    for z in zs {
        assert_eq!(z.values[0], 1.0);
        assert!(z.values.iter().all(|v| *v > 0.0 && v.is_finite()));
    }
}

#[test]
fn wrong_pair_is_caught_both_ways() {
    let t = LevyTriplet::diffusion(0.05, 0.04).unwrap();
    let lc = LocalCharacteristics::levy(TimeGrid::uniform(1.0, 10).unwrap(), &t).unwrap();
    let pair = explicit_beta_pair(&lc).unwrap().shift_beta(0.5);
    let engine = McEngine::new(N, 2).unwrap();
    let s = FixedScenario::new(lc, pair, 1e-3);
    // Z is still a density, but S is not a martingale under it.
    assert!(engine.density_martingale(&s).unwrap().pass);
    assert!(!engine.q_martingale_via_density(&s).unwrap().pass);
    assert!(matches!(
        engine.q_martingale_direct(&s),
        Err(VerifyError::DriftAssertionFailed { .. })
    ));
}

#[test]
fn infinite_exponential_moment_is_reported() {
    // M < 1: ∫_{x>1} e^x F(dx) diverges.
    let t = LevyTriplet::new(0.0, 0.04, LevyMeasure::cgmy(1.0, 5.0, 0.5, 0.5)).unwrap();
    let lc = LocalCharacteristics::levy(TimeGrid::uniform(1.0, 4).unwrap(), &t).unwrap();
    let engine = McEngine::new(10, 1).unwrap();
    let s = FixedScenario::new(lc, GirsanovPair::identity(), 1e-3);
    assert_eq!(
        engine.q_martingale_via_density(&s).unwrap_err(),
        VerifyError::ExponentialMomentInfinite
    );
}
