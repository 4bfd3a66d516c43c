//! Inverse-CDF sampling of jump sizes from a (reweighted) Lévy measure
//! restricted to `|x| > cutoff`.

use std::sync::Arc;

use rand::Rng;

use crate::levy::{JumpKernel, JumpWeight, LevyMeasure};

use super::ModelError;

/// Log-radius step of the sampling tables. Node `t = 0` (|x| = 1) is always
/// on the grid so weights that jump there are never interpolated across.
const STEP: f64 = 1.0 / 256.0;
const MAX_LOG_RADIUS: f64 = 9.3;
/// Stand-in cutoff for finite-activity measures with a density: jumps below
/// it carry negligible mass.
pub(crate) const FINITE_ACTIVITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
enum Entry {
    Atom(f64),
    /// Linear density in `t = ln|x|` between `k0` at `t0` and `k1` at `t1`.
    Segment {
        sign: f64,
        t0: f64,
        t1: f64,
        k0: f64,
        k1: f64,
    },
}

/// Tabulated jump law: total mass plus an inverse CDF.
#[derive(Debug, Clone)]
pub struct JumpTable {
    total: f64,
    cum: Vec<f64>,
    entries: Vec<Entry>,
}

impl JumpTable {
    /// Tabulates `weight(x) F(dx)` on `|x| > cutoff`.
    pub fn build<W: Fn(f64) -> f64>(
        measure: &LevyMeasure,
        cutoff: f64,
        weight: W,
    ) -> Result<Self, ModelError> {
        let mut table = JumpTable {
            total: 0.0,
            cum: Vec::new(),
            entries: Vec::new(),
        };
        for a in measure.atoms() {
            if a.x.abs() > cutoff {
                table.push(a.mass * weight(a.x), Entry::Atom(a.x));
            }
        }
        if measure.has_density() {
            let (neg, pos) = measure.sides();
            let floor = if cutoff > 0.0 {
                cutoff
            } else {
                FINITE_ACTIVITY_FLOOR
            };
            let beyond = measure.monotone_beyond().max(1.0).ln();
            for (on, sign) in [(neg, -1.0), (pos, 1.0)] {
                if on {
                    table.tabulate_side(measure, &weight, sign, floor.ln(), beyond);
                }
            }
        }
        if !table.total.is_finite() {
            return Err(ModelError::InvalidParams(
                "jump intensity above the cutoff is not finite".into(),
            ));
        }
        Ok(table)
    }

    fn push(&mut self, mass: f64, entry: Entry) {
        if mass > 0.0 {
            self.total += mass;
            self.cum.push(self.total);
            self.entries.push(entry);
        }
    }

    fn tabulate_side<W: Fn(f64) -> f64>(
        &mut self,
        measure: &LevyMeasure,
        weight: &W,
        sign: f64,
        start: f64,
        beyond: f64,
    ) {
        let k = |t: f64| {
            let x = sign * t.exp();
            weight(x) * measure.density(x) * t.exp()
        };
        let side_start = self.total;
        let mut t0 = start;
        while t0 < MAX_LOG_RADIUS {
            let t1 = ((t0 / STEP).floor() + 1.0) * STEP;
            let t1 = if t1 - t0 < 1e-9 { t1 + STEP } else { t1 };
            let h = t1 - t0;
            // Endpoint values are taken just inside the segment so a jump in
            // the weight at |x| = 1 lands on the correct side.
            let d = 1e-9 * h;
            let (k0, km, k1) = (k(t0 + d), k(0.5 * (t0 + t1)), k(t1 - d));
            let mass = h / 6.0 * (k0 + 4.0 * km + k1);
            self.push(
                mass,
                Entry::Segment {
                    sign,
                    t0,
                    t1,
                    k0,
                    k1,
                },
            );
            if t1 > beyond && mass <= 1e-17 * (self.total - side_start) {
                break;
            }
            t0 = t1;
        }
    }

    /// Total mass `∫_{|x|>cutoff} weight dF` as tabulated.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = rng.random::<f64>() * self.total;
        let i = self.cum.partition_point(|c| *c <= v).min(self.entries.len() - 1);
        match self.entries[i] {
            Entry::Atom(x) => x,
            Entry::Segment {
                sign,
                t0,
                t1,
                k0,
                k1,
            } => {
                let w: f64 = rng.random();
                // Inverse CDF of the linear density on [0, 1].
                let a = 0.5 * (k1 - k0);
                let c = w * 0.5 * (k0 + k1);
                let disc = (k0 * k0 + 4.0 * a * c).max(0.0);
                let denom = k0 + disc.sqrt();
                let s = if denom > 0.0 { (2.0 * c / denom).clamp(0.0, 1.0) } else { w };
                sign * (t0 + s * (t1 - t0)).exp()
            }
        }
    }
}

/// Jump law on one cell as a mixture `Σ coef_j · table_j`.
#[derive(Debug, Clone)]
pub(crate) struct JumpLaw {
    components: Vec<(Arc<JumpTable>, f64)>,
    /// `Σ coef_j · total_j`.
    pub(crate) intensity: f64,
}

impl JumpLaw {
    fn new(components: Vec<(Arc<JumpTable>, f64)>) -> Self {
        let intensity = components.iter().map(|(t, c)| c * t.total()).sum();
        JumpLaw {
            components,
            intensity,
        }
    }

    pub(crate) fn none() -> Self {
        JumpLaw {
            components: Vec::new(),
            intensity: 0.0,
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].0.sample(rng);
        }
        let mut v = rng.random::<f64>() * self.intensity;
        for (table, coef) in &self.components {
            let m = coef * table.total();
            if v < m {
                return table.sample(rng);
            }
            v -= m;
        }
        let last = self
            .components
            .iter()
            .rev()
            .find(|(t, c)| c * t.total() > 0.0)
            .expect("sampling from an empty jump law");
        last.0.sample(rng)
    }
}

fn cached_table<W: Fn(f64) -> f64>(
    kernel: &JumpKernel,
    key: Vec<u64>,
    cutoff: f64,
    weight: W,
) -> Result<Arc<JumpTable>, ModelError> {
    if let Some(t) = kernel.tables().lock().expect("table cache poisoned").get(&key) {
        return Ok(t.clone());
    }
    let table = Arc::new(JumpTable::build(kernel.measure(), cutoff, weight)?);
    kernel
        .tables()
        .lock()
        .expect("table cache poisoned")
        .insert(key, table.clone());
    Ok(table)
}

/// Per-cell jump laws of `W(i, x) F(dx)` on `|x| > cutoff` for cells `0..n`.
pub(crate) fn jump_laws(
    kernel: &JumpKernel,
    weight: &JumpWeight,
    cutoff: f64,
    n: usize,
) -> Result<Vec<JumpLaw>, ModelError> {
    if kernel.measure().is_zero() {
        return Ok(vec![JumpLaw::none(); n]);
    }
    let measure = kernel.measure();
    if let JumpWeight::Piecewise { lower, upper } = weight {
        let piece = |tag: u64, f: fn(f64) -> f64| {
            cached_table(kernel, vec![1, tag, cutoff.to_bits()], cutoff, f)
        };
        let mid = piece(0, |x| {
            if x.abs() <= 1.0 {
                crate::levy::middle_branch(x)
            } else {
                0.0
            }
        })?;
        let left = piece(1, |x| {
            if x < -1.0 {
                crate::levy::left_branch(x)
            } else {
                0.0
            }
        })?;
        let right = piece(2, |x| {
            if x > 1.0 {
                crate::levy::right_branch(x)
            } else {
                0.0
            }
        })?;
        return Ok((0..n)
            .map(|i| {
                JumpLaw::new(vec![
                    (mid.clone(), 1.0),
                    (left.clone(), lower.at(i)),
                    (right.clone(), upper.at(i)),
                ])
            })
            .collect());
    }
    let mut laws = Vec::with_capacity(n);
    let mut previous: Option<(Vec<u64>, JumpLaw)> = None;
    for i in 0..n {
        match weight.slice_key(i) {
            Some(slice) => {
                if let Some((k, law)) = &previous {
                    if *k == slice {
                        laws.push(law.clone());
                        continue;
                    }
                }
                let mut key = vec![0, cutoff.to_bits()];
                key.extend(&slice);
                let table = cached_table(kernel, key, cutoff, |x| weight.eval(i, x))?;
                let law = JumpLaw::new(vec![(table, 1.0)]);
                laws.push(law.clone());
                previous = Some((slice, law));
            }
            None => {
                let table = JumpTable::build(measure, cutoff, |x| weight.eval(i, x))?;
                laws.push(JumpLaw::new(vec![(Arc::new(table), 1.0)]));
            }
        }
    }
    Ok(laws)
}
