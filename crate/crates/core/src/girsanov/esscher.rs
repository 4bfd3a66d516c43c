use std::collections::HashMap;

use crate::characteristics::LocalCharacteristics;
use crate::levy::{CellValues, JumpWeight, Quantity};

use super::{GirsanovError, GirsanovPair};

const ROOT_TOL: f64 = 1e-12;
const MAX_BRACKET_STEPS: usize = 200;

/// Esscher pair `β_i = θ_i`, `U(i, x) = e^{θ_i x}` where `θ_i` is the root of
/// `g(θ) = b_i + (θ + ½)c_i + s_i ∫((e^x − 1)e^{θx} − h) W dF`.
///
/// Roots are memoized per distinct `(b_i, c_i, s_i)` when the kernel weight
/// is homogeneous.
pub fn esscher_pair(lc: &LocalCharacteristics) -> Result<GirsanovPair, GirsanovError> {
    let n = lc.cells();
    let homogeneous = lc.weight().is_homogeneous();
    let mut memo: HashMap<[u64; 3], f64> = HashMap::new();
    let mut theta = Vec::with_capacity(n);
    for i in 0..n {
        let (b, c, s) = (lc.drift()[i], lc.diffusion()[i], lc.scale()[i]);
        let key = [b.to_bits(), c.to_bits(), s.to_bits()];
        if homogeneous {
            if let Some(t) = memo.get(&key) {
                theta.push(*t);
                continue;
            }
        }
        let t = solve_cell(lc, i)?;
        memo.insert(key, t);
        theta.push(t);
    }
    let u = JumpWeight::Exponential {
        theta: CellValues::per_cell(theta.clone()),
    };
    Ok(GirsanovPair::new(theta, u))
}

fn solve_cell(lc: &LocalCharacteristics, cell: usize) -> Result<f64, GirsanovError> {
    let (b, c, s) = (lc.drift()[cell], lc.diffusion()[cell], lc.scale()[cell]);
    let jumps = lc.has_jumps() && s > 0.0;
    let (lo, hi) = if jumps {
        let (lo, hi) = lc.kernel().measure().exponential_domain();
        (lo, hi - 1.0)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    if !(lo < hi) {
        return Err(GirsanovError::ExponentialMomentInfinite);
    }
    let integral = |theta: f64, q: Quantity| -> Option<f64> {
        if !jumps {
            return Some(0.0);
        }
        lc.kernel()
            .integral(cell, lc.weight(), &JumpWeight::exponential(theta), q)
            .ok()
            .filter(|v| v.is_finite())
    };
    let g = |theta: f64| -> Option<f64> {
        if !(theta > lo && theta < hi) {
            return None;
        }
        integral(theta, Quantity::Mpre).map(|j| b + (theta + 0.5) * c + s * j)
    };

    let g0 = g(0.0).ok_or(GirsanovError::NoRoot { cell })?;
    if g0 == 0.0 {
        return Ok(0.0);
    }
    // g is increasing, so the root lies on the side opposite to sign(g(0)).
    let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
    let (mut inner, mut g_inner) = (0.0, g0);
    let mut step = 1.0;
    let mut outer = None;
    for _ in 0..MAX_BRACKET_STEPS {
        let mut cand = inner + dir * step;
        let bound = if dir > 0.0 { hi } else { lo };
        if (dir > 0.0 && cand >= bound) || (dir < 0.0 && cand <= bound) {
            cand = 0.5 * (inner + bound);
        }
        match g(cand) {
            Some(v) if v.signum() != g_inner.signum() => {
                outer = Some((cand, v));
                break;
            }
            Some(v) => {
                inner = cand;
                g_inner = v;
                step *= 2.0;
            }
            None => step = 0.5 * (cand - inner).abs(),
        }
        if step < 1e-300 || inner.abs() > 1e12 {
            break;
        }
    }
    let (mut a, mut b_) = match outer {
        Some((t, _)) => (inner.min(t), inner.max(t)),
        None => return Err(GirsanovError::NoRoot { cell }),
    };
    let g_a = g(a).ok_or(GirsanovError::NoRoot { cell })?;
    while b_ - a > ROOT_TOL * (1.0 + a.abs().max(b_.abs())) {
        let m = 0.5 * (a + b_);
        match g(m) {
            Some(v) if v == 0.0 => return Ok(m),
            Some(v) if v.signum() == g_a.signum() => a = m,
            Some(_) => b_ = m,
            None => return Err(GirsanovError::NoRoot { cell }),
        }
    }
    let mut root = 0.5 * (a + b_);
    // One Newton step, kept only if it improves the residual.
    if let (Some(v), Some(slope)) = (g(root), integral(root, Quantity::TiltSlope)) {
        let d = c + s * slope;
        if d > 0.0 {
            let polished = root - v / d;
            if let Some(w) = g(polished) {
                if w.abs() < v.abs() {
                    root = polished;
                }
            }
        }
    }
    Ok(root)
}
