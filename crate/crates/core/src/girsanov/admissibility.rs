use serde::Serialize;

use crate::characteristics::{FactorPath, LocalCharacteristics, TimeGrid};
use crate::levy::Quantity;

use super::{mpre_residuals, GirsanovPair};

/// Default per-cell tolerance on the MPRE residual.
pub const DEFAULT_MPRE_TOL: f64 = 1e-8;

/// Grid points used to probe `U > 0`, besides the atoms of the measure.
const POSITIVITY_SAMPLES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HellingerVerdict {
    Finite { value: f64 },
    Divergent,
}

impl HellingerVerdict {
    pub fn value(&self) -> Option<f64> {
        match *self {
            HellingerVerdict::Finite { value } => Some(value),
            HellingerVerdict::Divergent => None,
        }
    }
}

/// Outcome of the admissibility checks for one pair on one set of
/// characteristics. Divergent integrals are reported as `None` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub u_positive: bool,
    pub h_u_integrable: bool,
    /// `Σ s_i Δt_i ∫|h(x)(U − 1)| W dF`.
    pub h_u_value: Option<f64>,
    pub tail_integrable: bool,
    /// `Σ s_i Δt_i ∫_{x>1} (e^x − 1) U W dF`.
    pub tail_value: Option<f64>,
    pub hellinger: HellingerVerdict,
    /// `max_i |r_i|`, `None` when a residual could not be evaluated.
    pub mpre_max_residual: Option<f64>,
    pub tolerance: f64,
    /// `β` and `U` depend on the randomness only through the factor path.
    pub measurability: &'static str,
    pub pass: bool,
}

/// `Σ β_i² c_i Δt_i + Σ s_i Δt_i ∫(1 − √U)² W dF`.
pub fn hellinger_process(lc: &LocalCharacteristics, pair: &GirsanovPair) -> HellingerVerdict {
    let grid = lc.grid();
    let mut value = 0.0;
    for i in 0..lc.cells() {
        let b = pair.beta.at(i);
        value += b * b * lc.diffusion()[i] * grid.dt(i);
    }
    if lc.has_jumps() && !pair.u.is_identity() {
        match lc.jump_integrals(&pair.u, Quantity::Hellinger) {
            Ok(v) => {
                for (i, h) in v.iter().enumerate() {
                    value += lc.scale()[i] * grid.dt(i) * h;
                }
            }
            Err(_) => return HellingerVerdict::Divergent,
        }
    }
    if value.is_finite() {
        HellingerVerdict::Finite { value }
    } else {
        HellingerVerdict::Divergent
    }
}

fn scaled_sum(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    q: Quantity,
) -> Option<f64> {
    if !lc.has_jumps() {
        return Some(0.0);
    }
    let v = lc.jump_integrals(&pair.u, q).ok()?;
    let s: f64 = v
        .iter()
        .enumerate()
        .map(|(i, x)| lc.scale()[i] * lc.grid().dt(i) * x)
        .sum();
    s.is_finite().then_some(s)
}

fn u_positive(lc: &LocalCharacteristics, pair: &GirsanovPair) -> bool {
    let n = lc.cells();
    let cells: Vec<usize> = if pair.u.is_homogeneous() {
        vec![0]
    } else {
        let stride = n.div_ceil(256).max(1);
        (0..n).step_by(stride).chain(std::iter::once(n - 1)).collect()
    };
    let grid = (0..=POSITIVITY_SAMPLES)
        .map(|k| -20.0 + 40.0 * k as f64 / POSITIVITY_SAMPLES as f64)
        .filter(|x| *x != 0.0);
    let atoms = lc.kernel().measure().atoms().iter().map(|a| a.x);
    let xs: Vec<f64> = grid.chain(atoms).collect();
    cells.iter().all(|&i| {
        pair.u.eval(i, 0.0) == 1.0
            && xs.iter().all(|&x| {
                let u = pair.u.eval(i, x);
                u.is_finite() && u > 0.0
            })
    })
}

/// Runs every admissibility check and aggregates the verdicts.
pub fn admissibility_check(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    tol: f64,
) -> AdmissibilityReport {
    let u_positive = u_positive(lc, pair);
    let h_u_value = scaled_sum(lc, pair, Quantity::AbsDriftShift);
    let tail_value = scaled_sum(lc, pair, Quantity::RightTailExp);
    let hellinger = hellinger_process(lc, pair);
    let mpre_max_residual = mpre_residuals(lc, pair).ok().and_then(|r| {
        let m = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (m.is_finite() && r.iter().all(|v| v.is_finite())).then_some(m)
    });
    let pass = u_positive
        && h_u_value.is_some()
        && tail_value.is_some()
        && hellinger.value().is_some()
        && mpre_max_residual.is_some_and(|m| m <= tol);
    AdmissibilityReport {
        u_positive,
        h_u_integrable: h_u_value.is_some(),
        h_u_value,
        tail_integrable: tail_value.is_some(),
        tail_value,
        hellinger,
        mpre_max_residual,
        tolerance: tol,
        measurability: "by construction: beta and U are functions of (factor path, cell, x)",
        pass,
    }
}

/// Verdict on `∫_0^T (γ/σ)² ds < ∞` for a factor-driven diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpreCondition {
    pub finite: bool,
    /// Left-point sum `Σ (γ_i/σ_i)² Δt_i` on the path's grid.
    pub value: f64,
}

/// Checks `∫(γ(Y, s)/σ(Y, s))² ds < ∞` along `path`.
///
/// `r = (γ/σ)²` is scanned on a fine grid; around each of its largest local
/// maxima the peak is located by golden-section search and the local power
/// law `r ~ |t − t*|^{−p}` is estimated from dyadic offsets. The integral is
/// declared infinite if `r` is not finite somewhere or some peak has
/// `p >= 1` (up to `EXPONENT_MARGIN`).
pub fn bs_factor_mpre_condition<G, S>(gamma: G, sigma: S, path: &FactorPath) -> MpreCondition
where
    G: Fn(&FactorPath, f64) -> f64,
    S: Fn(&FactorPath, f64) -> f64,
{
    let r = |t: f64| {
        let q = gamma(path, t) / sigma(path, t);
        q * q
    };
    let base = path.grid();
    let times = base.times();
    let value: f64 = (0..base.cells()).map(|i| r(times[i]) * base.dt(i)).sum();
    let finite = value.is_finite() && peaks_integrable(&r, base);
    MpreCondition { finite, value }
}

const SCAN_POINTS: usize = 4096;
const MAX_PEAKS: usize = 8;
const EXPONENT_MARGIN: f64 = 0.02;

fn peaks_integrable<R: Fn(f64) -> f64>(r: &R, base: &TimeGrid) -> bool {
    let fine = base.refine(SCAN_POINTS.div_ceil(base.cells()).max(1));
    let t = fine.times();
    let v: Vec<f64> = t.iter().map(|&s| r(s)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let n = v.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&j| (j == 0 || v[j] >= v[j - 1]) && (j + 1 == n || v[j] >= v[j + 1]))
        .collect();
    peaks.sort_by(|a, b| v[*b].total_cmp(&v[*a]));
    peaks.truncate(MAX_PEAKS);
    let (start, end) = (t[0], t[n - 1]);
    for j in peaks {
        let lo = t[j.saturating_sub(1)];
        let hi = t[(j + 1).min(n - 1)];
        let Some(peak) = golden_max(r, lo, hi) else {
            return false;
        };
        let width = (hi - lo).max(f64::EPSILON);
        for side in [-1.0, 1.0] {
            let mut exps = Vec::new();
            let mut prev: Option<f64> = None;
            for k in 2..30 {
                let s = peak + side * width * 0.5f64.powi(k);
                if s < start || s > end || s == peak {
                    break;
                }
                let rv = r(s);
                if !rv.is_finite() {
                    return false;
                }
                if let Some(p) = prev {
                    if p > 0.0 && rv > 0.0 {
                        exps.push((rv / p).log2());
                    }
                }
                prev = Some(rv);
            }
            if exps.len() >= 6 {
                let tail = &exps[exps.len() - 6..];
                if tail.iter().all(|p| *p >= 1.0 - EXPONENT_MARGIN) {
                    return false;
                }
            }
        }
    }
    true
}

/// Golden-section search for the maximum of `r` on `[a, b]`; `None` if `r`
/// is not finite at a probed point.
fn golden_max<R: Fn(f64) -> f64>(r: &R, mut a: f64, mut b: f64) -> Option<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (r(x1), r(x2));
    for _ in 0..200 {
        if !(f1.is_finite() && f2.is_finite()) {
            return None;
        }
        if b - a <= 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = r(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = r(x2);
        }
    }
    Some(if f1 >= f2 { x1 } else { x2 })
}
