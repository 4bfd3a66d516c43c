use std::fmt;
use std::sync::Arc;

/// Per-cell parameter values. A single entry means the value is the same on
/// every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellValues(Vec<f64>);

impl CellValues {
    pub fn constant(v: f64) -> Self {
        CellValues(vec![v])
    }

    /// Collapses to a single value when every entry is bit-identical.
    pub fn per_cell(values: Vec<f64>) -> Self {
        match values.first() {
            Some(first) if values.iter().all(|v| v.to_bits() == first.to_bits()) => {
                CellValues(vec![*first])
            }
            _ => CellValues(values),
        }
    }

    #[inline]
    pub fn at(&self, cell: usize) -> f64 {
        if self.0.len() == 1 {
            self.0[0]
        } else {
            self.0[cell]
        }
    }

    pub fn is_constant(&self) -> bool {
        self.0.len() == 1
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A user-supplied reweighting `(cell, x) -> U`.
#[derive(Clone)]
pub struct CustomWeight(pub Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>);

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomWeight(..)")
    }
}

/// Jump reweighting `U(t, x)` applied to a Lévy kernel, evaluated per grid
/// cell.
///
/// `Piecewise` is the three-branch family
/// `lower/(1 − e^x)` on `x < −1`, `x/(e^x − 1)` on `0 < |x| <= 1`, `1` at
/// `0`, and `upper/(e^x − 1)` on `x > 1`.
#[derive(Debug, Clone)]
pub enum JumpWeight {
    Identity,
    /// Exponential tilt `e^{θ x}`.
    Exponential { theta: CellValues },
    Piecewise { lower: CellValues, upper: CellValues },
    Product(Arc<(JumpWeight, JumpWeight)>),
    Custom(CustomWeight),
}

/// Middle branch of the piecewise family, `x/(e^x − 1)` with value 1 at 0.
#[inline]
pub(crate) fn middle_branch(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x / x.exp_m1()
    }
}

/// Left-tail base shape `1/(1 − e^x)`.
#[inline]
pub(crate) fn left_branch(x: f64) -> f64 {
    -1.0 / x.exp_m1()
}

/// Right-tail base shape `1/(e^x − 1)`.
#[inline]
pub(crate) fn right_branch(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

impl JumpWeight {
    pub fn exponential(theta: f64) -> Self {
        JumpWeight::Exponential {
            theta: CellValues::constant(theta),
        }
    }

    pub fn custom<F: Fn(usize, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        JumpWeight::Custom(CustomWeight(Arc::new(f)))
    }

    /// Composition `self · other`, simplifying identities.
    pub fn times(&self, other: &JumpWeight) -> JumpWeight {
        match (self, other) {
            (JumpWeight::Identity, w) | (w, JumpWeight::Identity) => w.clone(),
            (a, b) => JumpWeight::Product(Arc::new((a.clone(), b.clone()))),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, JumpWeight::Identity)
    }

    #[inline]
    pub fn eval(&self, cell: usize, x: f64) -> f64 {
        match self {
            JumpWeight::Identity => 1.0,
            JumpWeight::Exponential { theta } => (theta.at(cell) * x).exp(),
            JumpWeight::Piecewise { lower, upper } => {
                if x < -1.0 {
                    lower.at(cell) * left_branch(x)
                } else if x > 1.0 {
                    upper.at(cell) * right_branch(x)
                } else {
                    middle_branch(x)
                }
            }
            JumpWeight::Product(pair) => pair.0.eval(cell, x) * pair.1.eval(cell, x),
            JumpWeight::Custom(f) => {
                if x == 0.0 {
                    1.0
                } else {
                    (f.0)(cell, x)
                }
            }
        }
    }

    /// The same on every cell.
    pub fn is_homogeneous(&self) -> bool {
        match self {
            JumpWeight::Identity => true,
            JumpWeight::Exponential { theta } => theta.is_constant(),
            JumpWeight::Piecewise { lower, upper } => lower.is_constant() && upper.is_constant(),
            JumpWeight::Product(pair) => pair.0.is_homogeneous() && pair.1.is_homogeneous(),
            JumpWeight::Custom(_) => false,
        }
    }

    /// Bit-level description of the slice `x ↦ U(cell, x)`; `None` when the
    /// weight is opaque.
    pub(crate) fn slice_key(&self, cell: usize) -> Option<Vec<u64>> {
        let mut out = Vec::new();
        self.write_key(cell, &mut out).then_some(out)
    }

    fn write_key(&self, cell: usize, out: &mut Vec<u64>) -> bool {
        match self {
            JumpWeight::Identity => {
                out.push(0);
                true
            }
            JumpWeight::Exponential { theta } => {
                out.extend([1, theta.at(cell).to_bits()]);
                true
            }
            JumpWeight::Piecewise { lower, upper } => {
                out.extend([2, lower.at(cell).to_bits(), upper.at(cell).to_bits()]);
                true
            }
            JumpWeight::Product(pair) => {
                out.push(3);
                pair.0.write_key(cell, out) && pair.1.write_key(cell, out)
            }
            JumpWeight::Custom(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_branches() {
        let w = JumpWeight::Piecewise {
            lower: CellValues::constant(1.0),
            upper: CellValues::constant(1.0),
        };
        assert_eq!(w.eval(0, 0.0), 1.0);
        assert!((w.eval(0, 1.0) - 0.581_976_706_869_326_4).abs() < 1e-15);
        assert!((w.eval(0, 2.0) - 0.156_517_642_749_665).abs() < 1e-15);
        assert!((w.eval(0, -2.0) - 1.0 / (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert!((w.eval(0, 1e-12) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn per_cell_collapses_when_constant() {
        assert!(CellValues::per_cell(vec![0.5; 7]).is_constant());
        assert!(!CellValues::per_cell(vec![0.5, 0.25]).is_constant());
    }

    #[test]
    fn product_and_keys() {
        let a = JumpWeight::exponential(0.5);
        let b = JumpWeight::exponential(-0.25);
        let p = a.times(&b);
        assert!((p.eval(3, 2.0) - 0.5f64.exp()).abs() < 1e-15);
        assert!(p.is_homogeneous());
        assert_eq!(a.slice_key(0), a.slice_key(99));
        assert!(JumpWeight::custom(|_, _| 2.0).slice_key(0).is_none());
        assert!(JumpWeight::Identity.times(&a).slice_key(0) == a.slice_key(0));
    }
}
