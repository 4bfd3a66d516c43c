//! Explicit pairs for time-changed Lévy models `X_t = μt + V_{∫Y_{s−}ds}`.

use crate::characteristics::{FactorPath, TimeChange};
use crate::levy::{CellValues, JumpWeight, LevyTriplet, Region};

use super::{positive_left_values, GirsanovError, GirsanovPair};

/// `∫(1 ∧ |x|) F(dx) < ∞` and the tail masses `(F(1, ∞), F(−∞, −1))`.
fn finite_variation_tails(tc: &TimeChange) -> Result<(f64, f64), GirsanovError> {
    let measure = tc.kernel().measure();
    let tol = tc.kernel().tol();
    measure
        .integrate_over(|x| x.abs().min(1.0), Region::all(), tol)
        .map_err(|_| GirsanovError::InfiniteVariationMeasure)?;
    Ok(measure.tail_masses(tol)?)
}

/// Diffusive construction: `U` is the three-branch weight with unit tail
/// coefficients, and
/// `β_t = −μ/(c^V Y_{t−}) − (b^V + F(1, ∞) − F(−∞, −1))/c^V − ½`.
#[derive(Debug, Clone)]
pub struct CgmyOuCase1 {
    mu: f64,
    c: f64,
    /// `(b^V + F(1, ∞) − F(−∞, −1))/c^V + ½`.
    offset: f64,
}

impl CgmyOuCase1 {
    pub fn new(tc: &TimeChange) -> Result<Self, GirsanovError> {
        if !(tc.c > 0.0) {
            return Err(GirsanovError::DiffusionMismatch {
                expected: "positive",
                got: tc.c,
            });
        }
        let (up, down) = finite_variation_tails(tc)?;
        Ok(CgmyOuCase1 {
            mu: tc.mu,
            c: tc.c,
            offset: (tc.b + up - down) / tc.c + 0.5,
        })
    }

    pub fn weight() -> JumpWeight {
        JumpWeight::Piecewise {
            lower: CellValues::constant(1.0),
            upper: CellValues::constant(1.0),
        }
    }

    pub fn pair(&self, path: &FactorPath) -> Result<GirsanovPair, GirsanovError> {
        let y = positive_left_values(path)?;
        let beta = y
            .iter()
            .map(|y| -self.mu / (self.c * y) - self.offset)
            .collect();
        Ok(GirsanovPair::new(beta, Self::weight()))
    }
}

/// Pure-jump construction: `β ≡ 0` and the three-branch weight with
/// path-dependent tail coefficients
/// `lower = (b⁺ + (μ/Y)⁺)/F(−∞, −1) + F(1, ∞)`,
/// `upper = (b⁻ + (μ/Y)⁻)/F(1, ∞) + F(−∞, −1)`.
#[derive(Debug, Clone)]
pub struct CgmyOuCase2 {
    mu: f64,
    b: f64,
    up: f64,
    down: f64,
}

impl CgmyOuCase2 {
    pub fn new(tc: &TimeChange) -> Result<Self, GirsanovError> {
        if tc.c != 0.0 {
            return Err(GirsanovError::DiffusionMismatch {
                expected: "zero",
                got: tc.c,
            });
        }
        let (up, down) = finite_variation_tails(tc)?;
        if !(up > 0.0 && down > 0.0) {
            return Err(GirsanovError::OneSidedJumps { up, down });
        }
        Ok(CgmyOuCase2 {
            mu: tc.mu,
            b: tc.b,
            up,
            down,
        })
    }

    pub fn pair(&self, path: &FactorPath) -> Result<GirsanovPair, GirsanovError> {
        let y = positive_left_values(path)?;
        let pos = |v: f64| v.max(0.0);
        let (mut lower, mut upper) = (Vec::with_capacity(y.len()), Vec::with_capacity(y.len()));
        for &yi in y {
            let m = self.mu / yi;
            lower.push((pos(self.b) + pos(m)) / self.down + self.up);
            upper.push((pos(-self.b) + pos(-m)) / self.up + self.down);
        }
        Ok(GirsanovPair {
            beta: CellValues::constant(0.0),
            u: JumpWeight::Piecewise {
                lower: CellValues::per_cell(lower),
                upper: CellValues::per_cell(upper),
            },
        })
    }
}

/// One-shot form of [`CgmyOuCase1`].
pub fn cgmy_ou_pair_case1(
    mu: f64,
    tv: &LevyTriplet,
    path: &FactorPath,
) -> Result<GirsanovPair, GirsanovError> {
    CgmyOuCase1::new(&TimeChange::new(mu, tv)?)?.pair(path)
}

/// One-shot form of [`CgmyOuCase2`].
pub fn cgmy_ou_pair_case2(
    mu: f64,
    tv: &LevyTriplet,
    path: &FactorPath,
) -> Result<GirsanovPair, GirsanovError> {
    CgmyOuCase2::new(&TimeChange::new(mu, tv)?)?.pair(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::{time_change_characteristics, TimeGrid};
    use crate::girsanov::mpre_residuals;
    use crate::levy::LevyMeasure;

    fn path(values: Vec<f64>) -> FactorPath {
        let n = values.len() - 1;
        FactorPath::new(TimeGrid::uniform(1.0, n).unwrap(), values).unwrap()
    }

    #[test]
    fn case_one_values() {
        let tv = LevyTriplet::diffusion(0.0, 1.0).unwrap();
        let p = cgmy_ou_pair_case1(0.0, &tv, &path(vec![1.0, 2.0, 3.0])).unwrap();
        assert!(p.beta.values().iter().all(|b| *b == -0.5));
        let w = CgmyOuCase1::weight();
        assert!((w.eval(0, 1.0) - 0.581_977).abs() < 5e-7);
        assert!((w.eval(0, 2.0) - 0.156_518).abs() < 5e-7);
        assert_eq!(w.eval(0, 0.0), 1.0);
    }

    #[test]
    fn case_one_solves_mpre_on_cgmy() {
        let tv = LevyTriplet::new(0.02, 0.04, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5)).unwrap();
        let y = path(vec![1.0, 0.7, 1.9, 0.2, 1.0]);
        let pair = cgmy_ou_pair_case1(0.05, &tv, &y).unwrap();
        let lc = time_change_characteristics(0.05, &tv, &y).unwrap();
        let r = mpre_residuals(&lc, &pair).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");
    }

    #[test]
    fn case_one_rejects_infinite_variation() {
        let tv = LevyTriplet::new(0.0, 0.04, LevyMeasure::cgmy(1.0, 5.0, 5.0, 1.5)).unwrap();
        assert_eq!(
            cgmy_ou_pair_case1(0.0, &tv, &path(vec![1.0, 1.0])).unwrap_err(),
            GirsanovError::InfiniteVariationMeasure
        );
    }

    #[test]
    fn case_two_atomic_values() {
        let tv = LevyTriplet::new(0.0, 0.0, LevyMeasure::atomic(&[(-2.0, 0.3), (2.0, 0.5)])).unwrap();
        let y = path(vec![1.0, 1.0]);
        let pair = cgmy_ou_pair_case2(0.0, &tv, &y).unwrap();
        // 0.5 / (1 − e^{−2}) = 0.578259
        assert!((pair.u.eval(0, -2.0) - 0.5 / (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert!((pair.u.eval(0, -2.0) - 0.578_259).abs() < 5e-7);
        assert!((pair.u.eval(0, 2.0) - 0.046_955).abs() < 5e-7);
        assert_eq!(pair.u.eval(0, 0.0), 1.0);
    }

    #[test]
    fn case_two_solves_mpre_for_either_sign() {
        let tv = LevyTriplet::new(
            -0.1,
            0.0,
            LevyMeasure::atomic(&[(-2.0, 0.3), (-0.4, 1.0), (0.3, 0.7), (1.5, 0.5)]),
        )
        .unwrap();
        let y = path(vec![0.5, 1.0, 2.0, 0.1]);
        for mu in [-0.3, 0.0, 0.2] {
            let pair = cgmy_ou_pair_case2(mu, &tv, &y).unwrap();
            let lc = time_change_characteristics(mu, &tv, &y).unwrap();
            let r = mpre_residuals(&lc, &pair).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-13), "{mu} {r:?}");
        }
    }

    #[test]
    fn case_two_needs_both_tails() {
        let tv = LevyTriplet::new(0.0, 0.0, LevyMeasure::atomic(&[(2.0, 0.5), (-0.5, 1.0)])).unwrap();
        assert!(matches!(
            cgmy_ou_pair_case2(0.0, &tv, &path(vec![1.0, 1.0])),
            Err(GirsanovError::OneSidedJumps { .. })
        ));
    }
}
