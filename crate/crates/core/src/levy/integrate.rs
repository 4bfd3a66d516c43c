use super::{LevyError, LevyMeasure};
use crate::quadrature::{self, Estimate};

/// Width (in `ln|x|`) of one annulus approaching the origin.
const ANNULUS_WIDTH: f64 = 2.0;
/// Width (in `ln|x|`) of one tail chunk; chunks double in length.
const TAIL_WIDTH: f64 = std::f64::consts::LN_2;
/// Annuli stop here; `e^{-700}` is close to the smallest normal f64.
const MIN_LOG_RADIUS: f64 = -700.0;
/// Tail chunks stop here.
const MAX_LOG_RADIUS: f64 = 690.0;

/// A subset of `R \ {0}` described by the sides it covers and the range
/// `lo < |x| <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub negative: bool,
    pub positive: bool,
    pub lo: f64,
    pub hi: f64,
}

impl Region {
    pub const fn all() -> Self {
        Region {
            negative: true,
            positive: true,
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    /// `|x| > eps`.
    pub const fn above(eps: f64) -> Self {
        Region {
            lo: eps,
            ..Self::all()
        }
    }

    /// `0 < |x| <= eps`.
    pub const fn below(eps: f64) -> Self {
        Region {
            hi: eps,
            ..Self::all()
        }
    }

    /// `0 < |x| <= 1`, where the truncation function is the identity.
    pub const fn middle() -> Self {
        Self::below(1.0)
    }

    /// `x > 1`.
    pub const fn right_tail() -> Self {
        Region {
            negative: false,
            positive: true,
            lo: 1.0,
            hi: f64::INFINITY,
        }
    }

    /// `x < -1`.
    pub const fn left_tail() -> Self {
        Region {
            negative: true,
            positive: false,
            lo: 1.0,
            hi: f64::INFINITY,
        }
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region {
            negative: self.negative && other.negative,
            positive: self.positive && other.positive,
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.negative || self.positive) || self.lo >= self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        let side = if x > 0.0 {
            self.positive
        } else if x < 0.0 {
            self.negative
        } else {
            false
        };
        side && x.abs() > self.lo && x.abs() <= self.hi
    }
}

impl LevyMeasure {
    /// `∫ g dF` over all of `R \ {0}`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, tol: f64) -> Result<Estimate, LevyError> {
        self.integrate_over(g, Region::all(), tol)
    }

    /// `∫_R g dF`. Returns [`LevyError::Divergent`] when the contributions of
    /// successive annuli (near 0) or tail chunks (near infinity) fail to
    /// converge before the floating-point range is exhausted.
    pub fn integrate_over<G: Fn(f64) -> f64>(
        &self,
        g: G,
        region: Region,
        tol: f64,
    ) -> Result<Estimate, LevyError> {
        if region.is_empty() {
            return Ok(Estimate::default());
        }
        match self {
            LevyMeasure::Zero => Ok(Estimate::default()),
            LevyMeasure::FiniteAtomic { atoms } => {
                let value = atoms
                    .iter()
                    .filter(|a| region.contains(a.x))
                    .map(|a| g(a.x) * a.mass)
                    .sum::<f64>();
                if value.is_finite() {
                    Ok(Estimate { value, error: 0.0 })
                } else {
                    Err(LevyError::Divergent("non-finite integrand at an atom".into()))
                }
            }
            _ => {
                let (neg, pos) = self.sides();
                let mut total = Estimate::default();
                let piece_tol = tol / 4.0;
                for sign in [-1.0, 1.0] {
                    let active = if sign < 0.0 {
                        neg && region.negative
                    } else {
                        pos && region.positive
                    };
                    if !active {
                        continue;
                    }
                    let integrand = |t: f64| {
                        let r = t.exp();
                        let x = sign * r;
                        let d = self.density(x);
                        if d == 0.0 {
                            0.0
                        } else {
                            g(x) * d * r
                        }
                    };
                    total += self.integrate_side(&integrand, region.lo, region.hi, piece_tol)?;
                }
                Ok(total)
            }
        }
    }

    /// Sides carrying density: (negative, positive).
    pub(crate) fn sides(&self) -> (bool, bool) {
        match self {
            LevyMeasure::SubordinatorExpJumps { .. } => (false, true),
            LevyMeasure::Zero | LevyMeasure::FiniteAtomic { .. } => (false, false),
            _ => (true, true),
        }
    }

    /// `|x|` beyond which the density is monotone; tail chunks are not
    /// allowed to declare convergence before reaching it.
    pub(crate) fn monotone_beyond(&self) -> f64 {
        match *self {
            LevyMeasure::CompoundPoisson {
                jumps: super::JumpDensity::Normal { mean, std },
                ..
            } => mean.abs() + 10.0 * std,
            _ => 1.0,
        }
    }

    /// Integrates the log-radius integrand `k(t)` over `ln lo < t <= ln hi`.
    fn integrate_side<K: Fn(f64) -> f64>(
        &self,
        k: &K,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<Estimate, LevyError> {
        let mut total = Estimate::default();
        if lo < 1.0 {
            let top = hi.min(1.0);
            total += if lo == 0.0 {
                annuli(k, top.ln(), tol)?
            } else {
                log_segment(k, lo.ln(), top.ln(), tol)
            };
        }
        if hi > 1.0 {
            let start = lo.max(1.0);
            total += if hi.is_infinite() {
                tail_chunks(k, start.ln(), self.monotone_beyond().ln(), tol)?
            } else {
                log_segment(k, start.ln(), hi.ln(), tol)
            };
        }
        if !total.is_finite() {
            return Err(LevyError::Divergent("non-finite integral".into()));
        }
        Ok(total)
    }
}

/// `∫ g dF` — free-function form of [`LevyMeasure::integrate`].
pub fn integrate_levy<G: Fn(f64) -> f64>(
    measure: &LevyMeasure,
    g: G,
    tol: f64,
) -> Result<Estimate, LevyError> {
    measure.integrate(g, tol)
}

fn log_segment<K: Fn(f64) -> f64>(k: &K, a: f64, b: f64, tol: f64) -> Estimate {
    let pieces = ((b - a) / ANNULUS_WIDTH).ceil().max(1.0) as usize;
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == pieces { b } else { lo + width };
            quadrature::integrate(k, lo, hi, tol / pieces as f64)
        })
        .fold(Estimate::default(), |acc, e| acc + e)
}

/// Tracks successive contributions and decides when the remainder of a
/// geometric-like series is known to within tolerance.
struct SeriesStop {
    prev: Option<f64>,
    prev_tail: Option<f64>,
    settled: u32,
}

impl SeriesStop {
    fn new() -> Self {
        SeriesStop {
            prev: None,
            prev_tail: None,
            settled: 0,
        }
    }

    /// Returns `(tail value, tail error)` once two consecutive steps agree
    /// on the remainder. Either the remainder is bounded by `tol` (value 0),
    /// or the contributions are geometric with a stable ratio and the
    /// extrapolated remainder is consistent from one step to the next. The
    /// second case covers slowly converging power laws near the origin
    /// (stability index close to 2), whose densities overflow long before
    /// the remainder itself drops below `tol`.
    fn push(&mut self, c: f64, tol: f64, may_stop: bool) -> Option<(f64, f64)> {
        let verdict = match self.prev {
            Some(p) if c.abs() <= f64::MIN_POSITIVE && p.abs() <= f64::MIN_POSITIVE => {
                Some((0.0, 0.0))
            }
            Some(p) if c.abs() < p.abs() => {
                let q = c.abs() / p.abs();
                let bound = c.abs() * q / (1.0 - q);
                let signed = c / p;
                let tail = (signed > 0.0).then(|| c * signed / (1.0 - signed));
                let drift = match (tail, self.prev_tail) {
                    (Some(t), Some(prev)) => (prev - c - t).abs(),
                    _ => f64::INFINITY,
                };
                self.prev_tail = tail;
                if bound <= tol {
                    Some((0.0, bound))
                } else if drift <= tol {
                    tail.map(|t| (t, drift))
                } else {
                    None
                }
            }
            _ => {
                self.prev_tail = None;
                None
            }
        };
        self.prev = Some(c);
        match verdict {
            Some(tail) if may_stop => {
                self.settled += 1;
                (self.settled >= 2).then_some(tail)
            }
            _ => {
                self.settled = 0;
                None
            }
        }
    }
}

fn annuli<K: Fn(f64) -> f64>(k: &K, top: f64, tol: f64) -> Result<Estimate, LevyError> {
    let mut total = Estimate::default();
    let mut stop = SeriesStop::new();
    let mut upper = top;
    while upper > MIN_LOG_RADIUS {
        let lower = upper - ANNULUS_WIDTH;
        let c = quadrature::integrate(k, lower, upper, tol / 8.0);
        if !c.is_finite() {
            return Err(LevyError::Divergent("non-finite contribution near 0".into()));
        }
        total += c;
        if let Some((value, error)) = stop.push(c.value, tol / 4.0, true) {
            total.value += value;
            total.error += error;
            return Ok(total);
        }
        upper = lower;
    }
    Err(LevyError::Divergent(
        "annulus contributions near 0 do not converge".into(),
    ))
}

fn tail_chunks<K: Fn(f64) -> f64>(
    k: &K,
    start: f64,
    monotone_from: f64,
    tol: f64,
) -> Result<Estimate, LevyError> {
    let mut total = Estimate::default();
    let mut stop = SeriesStop::new();
    let mut lower = start;
    while lower < MAX_LOG_RADIUS {
        let upper = lower + TAIL_WIDTH;
        let c = quadrature::integrate(k, lower, upper, tol / 8.0);
        if !c.is_finite() {
            return Err(LevyError::Divergent("non-finite contribution in the tail".into()));
        }
        total += c;
        if let Some((value, error)) = stop.push(c.value, tol / 4.0, upper >= monotone_from) {
            total.value += value;
            total.error += error;
            return Ok(total);
        }
        lower = upper;
    }
    Err(LevyError::Divergent(
        "tail contributions do not converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::truncation;

    const TOL: f64 = 1e-11;

    #[test]
    fn atomic_is_exact_sum() {
        let f = LevyMeasure::atomic(&[(2f64.ln(), 1.0)]);
        let v = f
            .integrate(|x| x.exp_m1() - truncation(x), TOL)
            .unwrap()
            .value;
        assert!((v - (1.0 - 2f64.ln())).abs() < 1e-15);
        let f = LevyMeasure::atomic(&[(0.3, 2.0), (-1.5, 0.5), (4.0, 0.1)]);
        let v = f.integrate(|x| x * x, TOL).unwrap().value;
        assert_eq!(v, 0.09 * 2.0 + 2.25 * 0.5 + 16.0 * 0.1);
    }

    #[test]
    fn zero_integrand_gives_zero() {
        for f in [
            LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5),
            LevyMeasure::atomic(&[(1.0, 1.0)]),
            LevyMeasure::Zero,
        ] {
            assert_eq!(f.integrate(|_| 0.0, TOL).unwrap().value, 0.0);
        }
    }

    #[test]
    fn region_boundaries_are_half_open() {
        let f = LevyMeasure::atomic(&[(1.0, 1.0), (-1.0, 2.0), (2.0, 4.0)]);
        let mid = f.integrate_over(|_| 1.0, Region::middle(), TOL).unwrap().value;
        let right = f.integrate_over(|_| 1.0, Region::right_tail(), TOL).unwrap().value;
        let left = f.integrate_over(|_| 1.0, Region::left_tail(), TOL).unwrap().value;
        assert_eq!((mid, right, left), (3.0, 4.0, 0.0));
    }

    #[test]
    fn exponential_subordinator_moments() {
        let f = LevyMeasure::SubordinatorExpJumps {
            rate: 2.0,
            mean_jump: 0.3,
        };
        let mass = f.integrate(|_| 1.0, TOL).unwrap();
        assert!((mass.value - 2.0).abs() < 1e-10, "{mass:?}");
        let mean = f.integrate(|x| x, TOL).unwrap().value;
        assert!((mean - 0.6).abs() < 1e-10);
    }

    #[test]
    fn cgmy_divergence_is_a_verdict() {
        // ∫ |x| F(dx) = ∞ for Y >= 1.
        let f = LevyMeasure::cgmy(1.0, 5.0, 5.0, 1.2);
        assert!(matches!(
            f.integrate(|x| x.abs().min(1.0), TOL),
            Err(LevyError::Divergent(_))
        ));
        // ∫_{x>1} e^x F(dx) = ∞ for M < 1.
        let f = LevyMeasure::cgmy(1.0, 5.0, 0.5, 0.5);
        assert!(matches!(
            f.integrate_over(|x| x.exp(), Region::right_tail(), TOL),
            Err(LevyError::Divergent(_))
        ));
        // log-divergence near 0: ∫ x^{-1} dx from the Y = 0 tempered stable
        let f = LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.0);
        assert!(f.integrate(|_| 1.0, TOL).is_err());
    }

    #[test]
    fn normal_jumps_far_from_origin() {
        let f = LevyMeasure::CompoundPoisson {
            intensity: 3.0,
            jumps: crate::levy::JumpDensity::Normal {
                mean: 40.0,
                std: 0.5,
            },
        };
        let mass = f.integrate(|_| 1.0, TOL).unwrap().value;
        assert!((mass - 3.0).abs() < 1e-9, "{mass}");
    }
}
