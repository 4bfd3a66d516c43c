//! Lévy-Khinchine triplets, Lévy measures, and integrals against them.
//!
//! Every triplet is expressed with respect to the fixed truncation function
//! `h(x) = x 1{|x| <= 1}`; see [`truncation`].

mod exponent;
mod integrate;
mod kernel;
mod weight;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use integrate::{integrate_levy, Region};
pub use kernel::{JumpKernel, Quantity};
pub use weight::{CellValues, CustomWeight, JumpWeight};
pub(crate) use weight::{left_branch, middle_branch, right_branch};

pub use crate::quadrature::Estimate;
pub use num_complex::Complex64;

/// Default absolute tolerance for integrals against Lévy measures.
pub const DEFAULT_TOL: f64 = 1e-11;

/// The canonical truncation function `h(x) = x 1{|x| <= 1}`.
#[inline]
pub fn truncation(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LevyError {
    #[error("invalid Lévy measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),
    #[error("integral against the Lévy measure diverges ({0})")]
    Divergent(String),
    #[error("exponential moment ∫_(x>1) e^x F(dx) is infinite")]
    ExponentialMomentInfinite,
}

/// A point mass of a finite atomic Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

/// Jump-size law of a compound Poisson measure (normalized density).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpDensity {
    /// Gaussian jump sizes (Merton).
    Normal { mean: f64, std: f64 },
    /// Asymmetric double exponential (Kou): up-jumps with probability
    /// `p_up` and rate `eta_up`, down-jumps with rate `eta_down`.
    DoubleExponential {
        p_up: f64,
        eta_up: f64,
        eta_down: f64,
    },
}

impl JumpDensity {
    fn pdf(&self, x: f64) -> f64 {
        match *self {
            JumpDensity::Normal { mean, std } => {
                let z = (x - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            JumpDensity::DoubleExponential {
                p_up,
                eta_up,
                eta_down,
            } => {
                if x > 0.0 {
                    p_up * eta_up * (-eta_up * x).exp()
                } else if x < 0.0 {
                    (1.0 - p_up) * eta_down * (eta_down * x).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

/// A Lévy measure on `R \ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasure {
    /// The zero measure (no jumps).
    Zero,
    /// Finitely many atoms `x_i != 0` with masses `mass_i > 0`.
    #[serde(rename = "atomic")]
    FiniteAtomic { atoms: Vec<Atom> },
    /// Finite-activity jumps: `intensity * density(x) dx`.
    CompoundPoisson { intensity: f64, jumps: JumpDensity },
    /// Tempered stable density `C e^{-G|x|}/|x|^{1+Y}` (x < 0) and
    /// `C e^{-Mx}/x^{1+Y}` (x > 0).
    Cgmy {
        #[serde(rename = "C")]
        c: f64,
        #[serde(rename = "G")]
        g: f64,
        #[serde(rename = "M")]
        m: f64,
        #[serde(rename = "Y")]
        y: f64,
    },
    /// Positive exponential jumps of mean `mean_jump` arriving at `rate`;
    /// the usual driver of an OU subordinator.
    SubordinatorExpJumps { rate: f64, mean_jump: f64 },
}

impl LevyMeasure {
    pub fn cgmy(c: f64, g: f64, m: f64, y: f64) -> Self {
        LevyMeasure::Cgmy { c, g, m, y }
    }

    pub fn atomic(atoms: &[(f64, f64)]) -> Self {
        LevyMeasure::FiniteAtomic {
            atoms: atoms.iter().map(|&(x, mass)| Atom { x, mass }).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), LevyError> {
        let bad = |msg: &str| Err(LevyError::InvalidMeasure(msg.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            LevyMeasure::Zero => Ok(()),
            LevyMeasure::FiniteAtomic { atoms } => {
                for a in atoms {
                    if !a.x.is_finite() || a.x == 0.0 {
                        return bad("atom locations must be finite and non-zero");
                    }
                    if !positive(a.mass) {
                        return bad("atom masses must be positive");
                    }
                }
                Ok(())
            }
            LevyMeasure::CompoundPoisson { intensity, jumps } => {
                if !positive(*intensity) {
                    return bad("compound Poisson intensity must be positive");
                }
                match *jumps {
                    JumpDensity::Normal { mean, std } => {
                        if !mean.is_finite() || !positive(std) {
                            return bad("normal jump law needs finite mean and std > 0");
                        }
                    }
                    JumpDensity::DoubleExponential {
                        p_up,
                        eta_up,
                        eta_down,
                    } => {
                        if !(0.0..=1.0).contains(&p_up) || !positive(eta_up) || !positive(eta_down)
                        {
                            return bad("double exponential law needs p_up in [0,1] and positive rates");
                        }
                    }
                }
                Ok(())
            }
            LevyMeasure::Cgmy { c, g, m, y } => {
                if !positive(*c) || !positive(*g) || !positive(*m) {
                    return bad("CGMY requires C, G, M > 0");
                }
                if !y.is_finite() || *y >= 2.0 {
                    return bad("CGMY requires Y < 2");
                }
                Ok(())
            }
            LevyMeasure::SubordinatorExpJumps { rate, mean_jump } => {
                if !positive(*rate) || !positive(*mean_jump) {
                    return bad("subordinator driver needs positive rate and mean jump");
                }
                Ok(())
            }
        }
    }

    /// Lebesgue density of the absolutely continuous variants; zero for
    /// atomic and zero measures.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            LevyMeasure::Zero | LevyMeasure::FiniteAtomic { .. } => 0.0,
            LevyMeasure::CompoundPoisson { intensity, jumps } => {
                if x == 0.0 {
                    0.0
                } else {
                    intensity * jumps.pdf(x)
                }
            }
            LevyMeasure::Cgmy { c, g, m, y } => {
                if x > 0.0 {
                    c * (-m * x).exp() / x.powf(1.0 + y)
                } else if x < 0.0 {
                    let a = -x;
                    c * (-g * a).exp() / a.powf(1.0 + y)
                } else {
                    0.0
                }
            }
            LevyMeasure::SubordinatorExpJumps { rate, mean_jump } => {
                if x > 0.0 {
                    rate / mean_jump * (-x / mean_jump).exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        match self {
            LevyMeasure::FiniteAtomic { atoms } => atoms,
            _ => &[],
        }
    }

    pub fn has_density(&self) -> bool {
        matches!(
            self,
            LevyMeasure::CompoundPoisson { .. }
                | LevyMeasure::Cgmy { .. }
                | LevyMeasure::SubordinatorExpJumps { .. }
        )
    }

    /// Total mass is finite (compound Poisson type).
    pub fn is_finite_activity(&self) -> bool {
        match self {
            LevyMeasure::Cgmy { y, .. } => *y < 0.0,
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LevyMeasure::Zero => true,
            LevyMeasure::FiniteAtomic { atoms } => atoms.is_empty(),
            _ => false,
        }
    }

    /// Open interval of `k` for which `∫_{|x|>1} e^{kx} F(dx) < ∞`.
    pub fn exponential_domain(&self) -> (f64, f64) {
        match *self {
            LevyMeasure::Zero
            | LevyMeasure::FiniteAtomic { .. }
            | LevyMeasure::CompoundPoisson {
                jumps: JumpDensity::Normal { .. },
                ..
            } => (f64::NEG_INFINITY, f64::INFINITY),
            LevyMeasure::CompoundPoisson {
                jumps:
                    JumpDensity::DoubleExponential {
                        eta_up, eta_down, ..
                    },
                ..
            } => (-eta_down, eta_up),
            LevyMeasure::Cgmy { g, m, .. } => (-g, m),
            LevyMeasure::SubordinatorExpJumps { mean_jump, .. } => {
                (f64::NEG_INFINITY, 1.0 / mean_jump)
            }
        }
    }

    /// Whether `∫_{x>1} e^x F(dx)` is finite, decided analytically per variant.
    pub fn exponential_moment_finite(&self) -> bool {
        match *self {
            // At M = 1 the tail behaves like x^{-1-Y}, integrable iff Y > 0.
            LevyMeasure::Cgmy { m, y, .. } => m > 1.0 || (m == 1.0 && y > 0.0),
            _ => {
                let (_, hi) = self.exponential_domain();
                hi > 1.0
            }
        }
    }

    /// `F((1, ∞))` and `F((-∞, -1))`.
    pub fn tail_masses(&self, tol: f64) -> Result<(f64, f64), LevyError> {
        let up = self.integrate_over(|_| 1.0, Region::right_tail(), tol)?.value;
        let down = self.integrate_over(|_| 1.0, Region::left_tail(), tol)?.value;
        Ok((up, down))
    }

}

/// Lévy-Khinchine triplet `(b, c, F)` with respect to [`truncation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyTriplet {
    pub b: f64,
    pub c: f64,
    pub measure: LevyMeasure,
}

impl LevyTriplet {
    pub fn new(b: f64, c: f64, measure: LevyMeasure) -> Result<Self, LevyError> {
        let t = LevyTriplet { b, c, measure };
        t.validate()?;
        Ok(t)
    }

    pub fn diffusion(b: f64, c: f64) -> Result<Self, LevyError> {
        Self::new(b, c, LevyMeasure::Zero)
    }

    pub fn validate(&self) -> Result<(), LevyError> {
        if !self.b.is_finite() {
            return Err(LevyError::InvalidTriplet("drift must be finite".into()));
        }
        if !self.c.is_finite() || self.c < 0.0 {
            return Err(LevyError::InvalidTriplet(
                "diffusion coefficient must be finite and >= 0".into(),
            ));
        }
        self.measure.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_shape() {
        assert_eq!(truncation(0.0), 0.0);
        assert_eq!(truncation(0.5), 0.5);
        assert_eq!(truncation(-1.0), -1.0);
        assert_eq!(truncation(1.0 + 1e-12), 0.0);
        assert_eq!(truncation(-7.0), 0.0);
    }

    #[test]
    fn exponential_moment_verdicts() {
        assert!(LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5).exponential_moment_finite());
        assert!(!LevyMeasure::cgmy(1.0, 5.0, 0.5, 0.5).exponential_moment_finite());
        assert!(LevyMeasure::atomic(&[(3.0, 1.0), (-0.2, 4.0)]).exponential_moment_finite());
        assert!(LevyMeasure::Zero.exponential_moment_finite());
        let sub = LevyMeasure::SubordinatorExpJumps {
            rate: 1.0,
            mean_jump: 2.0,
        };
        assert!(!sub.exponential_moment_finite());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(LevyMeasure::atomic(&[(0.0, 1.0)]).validate().is_err());
        assert!(LevyMeasure::atomic(&[(1.0, -1.0)]).validate().is_err());
        assert!(LevyMeasure::cgmy(1.0, 5.0, 5.0, 2.0).validate().is_err());
        assert!(LevyTriplet::new(0.0, -0.1, LevyMeasure::Zero).is_err());
    }

    #[test]
    fn json_schema() {
        let m: LevyMeasure =
            serde_json::from_str(r#"{"variant":"cgmy","C":1.0,"G":5.0,"M":5.0,"Y":0.5}"#).unwrap();
        assert_eq!(m, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5));
        let m: LevyMeasure =
            serde_json::from_str(r#"{"variant":"atomic","atoms":[{"x":0.5,"mass":2.0}]}"#)
                .unwrap();
        assert_eq!(m, LevyMeasure::atomic(&[(0.5, 2.0)]));
        let bad = serde_json::from_str::<LevyMeasure>(
            r#"{"variant":"cgmy","C":1.0,"G":5.0,"M":5.0,"Y":0.5,"Z":1}"#,
        );
        assert!(bad.is_err());
    }
}
