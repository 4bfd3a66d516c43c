use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::weight::{left_branch, middle_branch, right_branch};
use super::{truncation, JumpWeight, LevyError, LevyMeasure, Region};
use crate::models::JumpTable;

/// Integrands `q(x, u)` evaluated against a (reweighted) jump kernel, with
/// `u = U(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    /// `(e^x − 1) u − h(x)`: the jump part of the market price of risk equation.
    Mpre,
    /// `h(x) (u − 1)`: drift shift of the modified characteristics.
    DriftShift,
    /// `|h(x) (u − 1)|`.
    AbsDriftShift,
    /// `(e^x − 1 − h(x)) u`.
    ExpCompensator,
    /// `(1 − √u)²`.
    Hellinger,
    /// `(e^x − 1) u` on `x > 1`.
    RightTailExp,
    /// `u − 1` on `|x| > ε`.
    CompensatorAbove(f64),
    /// `x (u − 1)` on `|x| <= ε`.
    SmallTilt(f64),
    /// `x² u` on `|x| <= ε`.
    SmallVariance(f64),
    /// `u` on `|x| > ε`.
    MassAbove(f64),
    /// `x u` on `ε < |x| <= 1`.
    CompensationMiddle(f64),
    /// `x (e^x − 1) u`: θ-derivative of `Mpre` under an exponential tilt.
    TiltSlope,
    /// `(1 ∧ x²) u`.
    TruncatedSecondMoment,
}

type Affine = (fn(f64) -> f64, fn(f64) -> f64);

fn one(_: f64) -> f64 {
    1.0
}
fn zero(_: f64) -> f64 {
    0.0
}
fn minus_one(_: f64) -> f64 {
    -1.0
}
fn ident(x: f64) -> f64 {
    x
}
fn neg(x: f64) -> f64 {
    -x
}
fn square(x: f64) -> f64 {
    x * x
}
fn expm1(x: f64) -> f64 {
    x.exp_m1()
}
fn neg_h(x: f64) -> f64 {
    -truncation(x)
}
fn expm1_minus_h(x: f64) -> f64 {
    x.exp_m1() - truncation(x)
}
fn x_expm1(x: f64) -> f64 {
    x * x.exp_m1()
}
fn square_capped(x: f64) -> f64 {
    (x * x).min(1.0)
}

impl Quantity {
    #[inline]
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match *self {
            Quantity::Mpre => x.exp_m1() * u - truncation(x),
            Quantity::DriftShift => truncation(x) * (u - 1.0),
            Quantity::AbsDriftShift => (truncation(x) * (u - 1.0)).abs(),
            Quantity::ExpCompensator => (x.exp_m1() - truncation(x)) * u,
            Quantity::Hellinger => {
                let d = 1.0 - u.sqrt();
                d * d
            }
            Quantity::RightTailExp => x.exp_m1() * u,
            Quantity::CompensatorAbove(_) => u - 1.0,
            Quantity::SmallTilt(_) => x * (u - 1.0),
            Quantity::SmallVariance(_) => x * x * u,
            Quantity::MassAbove(_) => u,
            Quantity::CompensationMiddle(_) => x * u,
            Quantity::TiltSlope => x * x.exp_m1() * u,
            Quantity::TruncatedSecondMoment => (x * x).min(1.0) * u,
        }
    }

    pub fn region(&self) -> Region {
        match *self {
            Quantity::RightTailExp => Region::right_tail(),
            Quantity::CompensatorAbove(eps) | Quantity::MassAbove(eps) => Region::above(eps),
            Quantity::SmallTilt(eps) | Quantity::SmallVariance(eps) => Region::below(eps),
            Quantity::CompensationMiddle(eps) => Region::above(eps).intersect(&Region::middle()),
            _ => Region::all(),
        }
    }

    /// `(A, B)` with `q(x, u) = A(x) u + B(x)`, when `q` is affine in `u`.
    fn affine(&self) -> Option<Affine> {
        Some(match *self {
            Quantity::Mpre => (expm1, neg_h),
            Quantity::DriftShift => (truncation, neg_h),
            Quantity::ExpCompensator => (expm1_minus_h, zero),
            Quantity::RightTailExp => (expm1, zero),
            Quantity::CompensatorAbove(_) => (one, minus_one),
            Quantity::SmallTilt(_) => (ident, neg),
            Quantity::SmallVariance(_) => (square, zero),
            Quantity::MassAbove(_) => (one, zero),
            Quantity::CompensationMiddle(_) => (ident, zero),
            Quantity::TiltSlope => (x_expm1, zero),
            Quantity::TruncatedSecondMoment => (square_capped, zero),
            Quantity::AbsDriftShift | Quantity::Hellinger => return None,
        })
    }

    /// Linear in `u` (no `B` term): a measure weight can be folded into `u`.
    fn is_linear(&self) -> bool {
        matches!(
            self,
            Quantity::ExpCompensator
                | Quantity::RightTailExp
                | Quantity::SmallVariance(_)
                | Quantity::MassAbove(_)
                | Quantity::CompensationMiddle(_)
                | Quantity::TiltSlope
                | Quantity::TruncatedSecondMoment
        )
    }

    fn key(&self) -> [u64; 2] {
        let (tag, eps) = match *self {
            Quantity::Mpre => (0, 0.0),
            Quantity::DriftShift => (1, 0.0),
            Quantity::AbsDriftShift => (2, 0.0),
            Quantity::ExpCompensator => (3, 0.0),
            Quantity::Hellinger => (4, 0.0),
            Quantity::RightTailExp => (5, 0.0),
            Quantity::CompensatorAbove(e) => (6, e),
            Quantity::SmallTilt(e) => (7, e),
            Quantity::SmallVariance(e) => (8, e),
            Quantity::MassAbove(e) => (9, e),
            Quantity::CompensationMiddle(e) => (10, e),
            Quantity::TiltSlope => (11, 0.0),
            Quantity::TruncatedSecondMoment => (12, 0.0),
        };
        [tag, f64::to_bits(eps)]
    }
}

/// Which part of the piecewise decomposition a cached value belongs to.
#[derive(Clone, Copy)]
enum Part {
    Whole = 0,
    Middle = 1,
    LeftA = 2,
    LeftB = 3,
    RightA = 4,
    RightB = 5,
    LeftDirect = 6,
    RightDirect = 7,
}

struct KernelInner {
    measure: LevyMeasure,
    tol: f64,
    integrals: Mutex<HashMap<Vec<u64>, f64>>,
    tables: Mutex<HashMap<Vec<u64>, Arc<JumpTable>>>,
}

/// A Lévy measure shared between many local characteristics, memoizing
/// integrals (and sampling tables) per distinct reweighting slice.
///
/// Cached values are pure functions of their keys, so sharing a kernel across
/// threads is safe.
#[derive(Clone)]
pub struct JumpKernel(Arc<KernelInner>);

impl std::fmt::Debug for JumpKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpKernel")
            .field("measure", &self.0.measure)
            .field("tol", &self.0.tol)
            .finish()
    }
}

impl JumpKernel {
    pub fn new(measure: LevyMeasure, tol: f64) -> Self {
        JumpKernel(Arc::new(KernelInner {
            measure,
            tol,
            integrals: Mutex::new(HashMap::new()),
            tables: Mutex::new(HashMap::new()),
        }))
    }

    pub fn measure(&self) -> &LevyMeasure {
        &self.0.measure
    }

    pub fn tol(&self) -> f64 {
        self.0.tol
    }

    pub(crate) fn tables(&self) -> &Mutex<HashMap<Vec<u64>, Arc<JumpTable>>> {
        &self.0.tables
    }

    /// `∫ q(x, U(cell, x)) W(cell, x) F(dx)` where `W` reweights the base
    /// measure and `U` is the Girsanov jump weight.
    pub fn integral(
        &self,
        cell: usize,
        measure_weight: &JumpWeight,
        u: &JumpWeight,
        q: Quantity,
    ) -> Result<f64, LevyError> {
        if self.0.measure.is_zero() {
            return Ok(0.0);
        }
        let (w, u) = canonical(measure_weight, u, q);
        if w.is_identity() {
            if let JumpWeight::Piecewise { lower, upper } = &u {
                let parts = self.piecewise_parts(q)?;
                return parts.combine(lower.at(cell), upper.at(cell), |side, a| {
                    self.piecewise_direct(q, side, a)
                });
            }
        }
        let key = match (w.slice_key(cell), u.slice_key(cell)) {
            (Some(wk), Some(uk)) => Some(compose_key(q, Part::Whole, &wk, &uk)),
            _ => None,
        };
        self.cached(key, || {
            self.0.measure.integrate_over(
                |x| q.eval(x, u.eval(cell, x)) * w.eval(cell, x),
                q.region(),
                self.0.tol,
            )
        })
    }

    /// [`JumpKernel::integral`] for cells `0..n`, reusing work across cells
    /// whenever the weights allow it.
    pub fn integral_cells(
        &self,
        n: usize,
        measure_weight: &JumpWeight,
        u: &JumpWeight,
        q: Quantity,
    ) -> Result<Vec<f64>, LevyError> {
        if self.0.measure.is_zero() {
            return Ok(vec![0.0; n]);
        }
        let (w, u) = canonical(measure_weight, u, q);
        if w.is_homogeneous() && u.is_homogeneous() {
            let v = if n == 0 { 0.0 } else { self.integral(0, &w, &u, q)? };
            return Ok(vec![v; n]);
        }
        if w.is_identity() {
            if let JumpWeight::Piecewise { lower, upper } = &u {
                let parts = self.piecewise_parts(q)?;
                return (0..n)
                    .map(|i| {
                        parts.combine(lower.at(i), upper.at(i), |side, a| {
                            self.piecewise_direct(q, side, a)
                        })
                    })
                    .collect();
            }
        }
        (0..n).map(|i| self.integral(i, &w, &u, q)).collect()
    }

    fn cached<F>(&self, key: Option<Vec<u64>>, compute: F) -> Result<f64, LevyError>
    where
        F: FnOnce() -> Result<crate::quadrature::Estimate, LevyError>,
    {
        if let Some(k) = &key {
            if let Some(v) = self.0.integrals.lock().expect("cache poisoned").get(k) {
                return Ok(*v);
            }
        }
        let v = compute()?.value;
        if let Some(k) = key {
            self.0.integrals.lock().expect("cache poisoned").insert(k, v);
        }
        Ok(v)
    }

    fn region_integral(
        &self,
        q: Quantity,
        part: Part,
        region: Region,
        f: impl Fn(f64) -> f64,
    ) -> Result<f64, LevyError> {
        let key = compose_key(q, part, &[], &[]);
        self.cached(Some(key), || {
            self.0
                .measure
                .integrate_over(f, q.region().intersect(&region), self.0.tol)
        })
    }

    fn piecewise_parts(&self, q: Quantity) -> Result<PiecewiseParts, LevyError> {
        let middle = self.region_integral(q, Part::Middle, Region::middle(), |x| {
            q.eval(x, middle_branch(x))
        })?;
        let tails = match q.affine() {
            Some((a, b)) => Some([
                self.region_integral(q, Part::LeftA, Region::left_tail(), |x| a(x) * left_branch(x))?,
                self.region_integral(q, Part::LeftB, Region::left_tail(), b)?,
                self.region_integral(q, Part::RightA, Region::right_tail(), |x| {
                    a(x) * right_branch(x)
                })?,
                self.region_integral(q, Part::RightB, Region::right_tail(), b)?,
            ]),
            None => None,
        };
        Ok(PiecewiseParts { middle, tails })
    }

    /// Non-affine quantities on one tail with coefficient `a`.
    fn piecewise_direct(&self, q: Quantity, left: bool, a: f64) -> Result<f64, LevyError> {
        let (part, region, shape): (Part, Region, fn(f64) -> f64) = if left {
            (Part::LeftDirect, Region::left_tail(), left_branch)
        } else {
            (Part::RightDirect, Region::right_tail(), right_branch)
        };
        let key = compose_key(q, part, &[a.to_bits()], &[]);
        self.cached(Some(key), || {
            self.0.measure.integrate_over(
                |x| q.eval(x, a * shape(x)),
                q.region().intersect(&region),
                self.0.tol,
            )
        })
    }
}

struct PiecewiseParts {
    middle: f64,
    /// `[∫_L A φ_L, ∫_L B, ∫_R A φ_R, ∫_R B]` for affine quantities.
    tails: Option<[f64; 4]>,
}

impl PiecewiseParts {
    fn combine<D>(&self, lower: f64, upper: f64, direct: D) -> Result<f64, LevyError>
    where
        D: Fn(bool, f64) -> Result<f64, LevyError>,
    {
        match self.tails {
            Some([la, lb, ra, rb]) => Ok(self.middle + lower * la + lb + upper * ra + rb),
            None => Ok(self.middle + direct(true, lower)? + direct(false, upper)?),
        }
    }
}

fn canonical(w: &JumpWeight, u: &JumpWeight, q: Quantity) -> (JumpWeight, JumpWeight) {
    if !w.is_identity() && q.is_linear() {
        (JumpWeight::Identity, w.times(u))
    } else {
        (w.clone(), u.clone())
    }
}

fn compose_key(q: Quantity, part: Part, a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut k = Vec::with_capacity(4 + a.len() + b.len());
    k.extend(q.key());
    k.push(part as u64);
    k.extend_from_slice(a);
    k.push(u64::MAX);
    k.extend_from_slice(b);
    k
}
