use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::characteristics::LocalCharacteristics;
use crate::levy::{JumpKernel, JumpWeight, LevyTriplet, Quantity, DEFAULT_TOL};

use super::jumps::{jump_laws, JumpLaw};
use super::{effective_cutoff, Decomposition, JumpRecord, ModelError, RngSpec, SimPath};

#[derive(Debug, Clone)]
struct Cell {
    /// `b Δ − s Δ ∫_{ε<|x|<=1} x W dF`.
    mean: f64,
    sd_continuous: f64,
    sd_small: f64,
    /// Expected number of jumps above the cutoff.
    jump_rate: f64,
}

/// Samples the additive process with given per-cell characteristics. Jumps
/// above the cutoff are drawn individually, the compensated jumps below it
/// are replaced by a Gaussian with matching variance.
#[derive(Debug, Clone)]
pub struct HsiiSimulator {
    cells: Vec<Cell>,
    laws: Vec<JumpLaw>,
    cutoff: f64,
    grid: Option<crate::characteristics::TimeGrid>,
}

/// Output of [`simulate_levy_increments`].
#[derive(Debug, Clone, PartialEq)]
pub struct LevyIncrements {
    pub increments: Vec<f64>,
    pub decomposition: Decomposition,
}

impl HsiiSimulator {
    pub fn new(lc: &LocalCharacteristics, eps: f64) -> Result<Self, ModelError> {
        let grid = lc.grid();
        let n = lc.cells();
        let clock: Vec<f64> = (0..n).map(|i| lc.scale()[i] * grid.dt(i)).collect();
        let mut sim = Self::from_parts(
            (0..n).map(|i| lc.drift()[i] * grid.dt(i)).collect(),
            (0..n).map(|i| lc.diffusion()[i] * grid.dt(i)).collect(),
            clock,
            lc.kernel(),
            lc.weight(),
            eps,
        )?;
        sim.grid = Some(grid.clone());
        Ok(sim)
    }

    fn from_parts(
        drift: Vec<f64>,
        variance: Vec<f64>,
        clock: Vec<f64>,
        kernel: &JumpKernel,
        weight: &JumpWeight,
        eps: f64,
    ) -> Result<Self, ModelError> {
        let n = drift.len();
        let active = !kernel.measure().is_zero() && clock.iter().any(|c| *c > 0.0);
        let cutoff = if active {
            effective_cutoff(kernel.measure(), eps)?
        } else {
            0.0
        };
        let (comp, small_var, laws) = if active {
            let comp =
                kernel.integral_cells(n, weight, &JumpWeight::Identity, Quantity::CompensationMiddle(cutoff))?;
            let var = if cutoff > 0.0 {
                kernel.integral_cells(n, weight, &JumpWeight::Identity, Quantity::SmallVariance(cutoff))?
            } else {
                vec![0.0; n]
            };
            (comp, var, jump_laws(kernel, weight, cutoff, n)?)
        } else {
            (vec![0.0; n], vec![0.0; n], vec![JumpLaw::none(); n])
        };
        let cells = (0..n)
            .map(|i| Cell {
                mean: drift[i] - clock[i] * comp[i],
                sd_continuous: variance[i].sqrt(),
                sd_small: (clock[i] * small_var[i]).max(0.0).sqrt(),
                jump_rate: clock[i] * laws[i].intensity,
            })
            .collect();
        Ok(HsiiSimulator {
            cells,
            laws,
            cutoff,
            grid: None,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Decomposition) {
        let n = self.cells.len();
        let mut dec = Decomposition {
            continuous: Vec::with_capacity(n),
            small: Vec::with_capacity(n),
            jumps: Vec::new(),
            cutoff: self.cutoff,
        };
        let mut inc = Vec::with_capacity(n);
        for (i, cell) in self.cells.iter().enumerate() {
            let xc = cell.sd_continuous * rng.sample::<f64, _>(StandardNormal);
            let small = cell.sd_small * rng.sample::<f64, _>(StandardNormal);
            let mut dx = cell.mean + xc + small;
            if cell.jump_rate > 0.0 {
                let count = Poisson::new(cell.jump_rate)
                    .expect("positive jump rate")
                    .sample(rng) as u64;
                for _ in 0..count {
                    let size = self.laws[i].sample(rng);
                    dx += size;
                    dec.jumps.push(JumpRecord { cell: i, size });
                }
            }
            dec.continuous.push(xc);
            dec.small.push(small);
            inc.push(dx);
        }
        (inc, dec)
    }

    /// One path on the characteristics' grid, `X_0 = 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimPath {
        let grid = self
            .grid
            .clone()
            .expect("simulator built from local characteristics");
        let (inc, dec) = self.draw(rng);
        let mut x = Vec::with_capacity(inc.len() + 1);
        x.push(0.0);
        let mut acc = 0.0;
        for d in inc {
            acc += d;
            x.push(acc);
        }
        SimPath {
            grid,
            x,
            decomposition: Some(dec),
        }
    }
}

/// One path of the process with local characteristics `lc`.
pub fn simulate_hsii_path(
    lc: &LocalCharacteristics,
    eps: f64,
    rng: &RngSpec,
) -> Result<SimPath, ModelError> {
    Ok(HsiiSimulator::new(lc, eps)?.sample(&mut rng.rng()))
}

/// Increments of the Lévy process `V` over clock increments `Δτ_i >= 0`.
pub fn simulate_levy_increments(
    triplet: &LevyTriplet,
    clock: &[f64],
    eps: f64,
    rng: &RngSpec,
) -> Result<LevyIncrements, ModelError> {
    triplet.validate()?;
    if clock.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(ModelError::InvalidParams(
            "clock increments must be finite and >= 0".into(),
        ));
    }
    let kernel = JumpKernel::new(triplet.measure.clone(), DEFAULT_TOL);
    let sim = HsiiSimulator::from_parts(
        clock.iter().map(|d| triplet.b * d).collect(),
        clock.iter().map(|d| triplet.c * d).collect(),
        clock.to_vec(),
        &kernel,
        &JumpWeight::Identity,
        eps,
    )?;
    let (increments, decomposition) = sim.draw(&mut rng.rng());
    Ok(LevyIncrements {
        increments,
        decomposition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::TimeGrid;
    use crate::levy::LevyMeasure;

    #[test]
    fn decomposition_adds_up() {
        let t = LevyTriplet::new(0.1, 0.2, LevyMeasure::atomic(&[(0.5, 3.0), (-1.5, 1.0)])).unwrap();
        let lc = LocalCharacteristics::levy(TimeGrid::uniform(1.0, 20).unwrap(), &t).unwrap();
        let path = simulate_hsii_path(&lc, 1e-3, &RngSpec::new(1, 2)).unwrap();
        let dec = path.decomposition.as_ref().unwrap();
        assert_eq!(path.x[0], 0.0);
        assert_eq!(dec.cutoff, 0.0);
        // Compensation of jumps in (0, 1]: 0.5 · 3 per unit time.
        let mut x = 0.0;
        for i in 0..20 {
            let jumps: f64 = dec.jumps.iter().filter(|j| j.cell == i).map(|j| j.size).sum();
            x += (0.1 - 1.5) * 0.05 + dec.continuous[i] + dec.small[i] + jumps;
            assert!((path.x[i + 1] - x).abs() < 1e-12);
        }
        assert!(dec.small.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn zero_clock_gives_zero_increments() {
        let t = LevyTriplet::new(0.3, 1.0, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5)).unwrap();
        let out = simulate_levy_increments(&t, &[0.0, 0.0], 1e-3, &RngSpec::new(0, 0)).unwrap();
        assert_eq!(out.increments, vec![0.0, 0.0]);
        assert!(out.decomposition.jumps.is_empty());
    }

    #[test]
    fn same_spec_same_path() {
        let t = LevyTriplet::new(0.0, 0.04, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5)).unwrap();
        let lc = LocalCharacteristics::levy(TimeGrid::uniform(1.0, 50).unwrap(), &t).unwrap();
        let a = simulate_hsii_path(&lc, 1e-3, &RngSpec::new(42, 7)).unwrap();
        let b = simulate_hsii_path(&lc, 1e-3, &RngSpec::new(42, 7)).unwrap();
        assert_eq!(a, b);
        let c = simulate_hsii_path(&lc, 1e-3, &RngSpec::new(42, 8)).unwrap();
        assert_ne!(a, c);
    }
}
