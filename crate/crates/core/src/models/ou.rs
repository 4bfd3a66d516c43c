use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::characteristics::{FactorPath, TimeGrid};
use crate::levy::LevyMeasure;

use super::{ModelError, RngSpec};

/// OU process `dY = −λ Y dt + dL` driven by a compound-Poisson subordinator
/// `L` without drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub y0: f64,
    pub lambda: f64,
    pub driver: LevyMeasure,
}

impl OuParams {
    pub fn new(y0: f64, lambda: f64, driver: LevyMeasure) -> Result<Self, ModelError> {
        let p = OuParams { y0, lambda, driver };
        p.validate()?;
        Ok(p)
    }

    /// Exponential jumps of mean `mean_jump` at rate `rate`.
    pub fn exponential_jumps(
        y0: f64,
        lambda: f64,
        rate: f64,
        mean_jump: f64,
    ) -> Result<Self, ModelError> {
        if rate == 0.0 {
            return Self::new(y0, lambda, LevyMeasure::Zero);
        }
        Self::new(
            y0,
            lambda,
            LevyMeasure::SubordinatorExpJumps { rate, mean_jump },
        )
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            return Err(ModelError::InvalidParams("OU needs Y0 > 0".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidParams("OU needs lambda > 0".into()));
        }
        self.driver.validate()?;
        match &self.driver {
            LevyMeasure::Zero | LevyMeasure::SubordinatorExpJumps { .. } => Ok(()),
            LevyMeasure::FiniteAtomic { atoms } if atoms.iter().all(|a| a.x > 0.0) => Ok(()),
            _ => Err(ModelError::InvalidParams(
                "OU driver must be compound Poisson with positive jumps".into(),
            )),
        }
    }

    /// `E[Y_t] = Y0 e^{−λt} + E[L_1](1 − e^{−λt})/λ`.
    pub fn mean_at(&self, t: f64) -> f64 {
        let jump_mean = match &self.driver {
            LevyMeasure::SubordinatorExpJumps { rate, mean_jump } => rate * mean_jump,
            LevyMeasure::FiniteAtomic { atoms } => atoms.iter().map(|a| a.x * a.mass).sum(),
            _ => 0.0,
        };
        let decay = (-self.lambda * t).exp();
        self.y0 * decay + jump_mean * (1.0 - decay) / self.lambda
    }

    fn intensity(&self) -> f64 {
        match &self.driver {
            LevyMeasure::SubordinatorExpJumps { rate, .. } => *rate,
            LevyMeasure::FiniteAtomic { atoms } => atoms.iter().map(|a| a.mass).sum(),
            _ => 0.0,
        }
    }

    fn jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.driver {
            LevyMeasure::SubordinatorExpJumps { mean_jump, .. } => {
                Exp::new(1.0 / mean_jump).expect("validated rate").sample(rng)
            }
            LevyMeasure::FiniteAtomic { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.mass).sum();
                let mut v = rng.random::<f64>() * total;
                for a in atoms {
                    if v < a.mass {
                        return a.x;
                    }
                    v -= a.mass;
                }
                atoms[atoms.len() - 1].x
            }
            _ => 0.0,
        }
    }

    /// Exact simulation on `grid` from the generator `rng`.
    ///
    /// The path is stored as `Y0 e^{−λ t_i} + J_i` with a non-negative jump
    /// accumulator `J`, so the lower bound `Y_t >= Y0 e^{−λ t}` holds exactly.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        grid: &TimeGrid,
        rng: &mut R,
    ) -> Result<FactorPath, ModelError> {
        self.validate()?;
        let times = grid.times();
        let t0 = times[0];
        let rate = self.intensity();
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(times.len());
        values.push(self.y0);
        for w in times.windows(2) {
            let dt = w[1] - w[0];
            acc *= (-self.lambda * dt).exp();
            if rate > 0.0 {
                let n = Poisson::new(rate * dt).expect("positive mean").sample(rng) as u64;
                for _ in 0..n {
                    let s = w[0] + dt * rng.random::<f64>();
                    acc += (-self.lambda * (w[1] - s)).exp() * self.jump(rng);
                }
            }
            values.push(self.y0 * (-self.lambda * (w[1] - t0)).exp() + acc);
        }
        Ok(FactorPath::new(grid.clone(), values)?)
    }
}

/// Simulates the OU factor on `grid` with the stream given by `rng`.
pub fn simulate_ou_subordinator(
    p: &OuParams,
    grid: &TimeGrid,
    rng: &RngSpec,
) -> Result<FactorPath, ModelError> {
    p.sample(grid, &mut rng.rng())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_jumps_is_deterministic_decay() {
        let p = OuParams::exponential_jumps(1.0, 0.5, 0.0, 0.3).unwrap();
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let y = simulate_ou_subordinator(&p, &grid, &RngSpec::new(1, 0)).unwrap();
        for (t, v) in grid.times().iter().zip(y.values()) {
            assert_eq!(*v, (-0.5 * t).exp());
        }
    }

    #[test]
    fn lower_bound_holds_exactly() {
        let p = OuParams::exponential_jumps(1.0, 0.5, 2.0, 0.3).unwrap();
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        for stream in 0..200 {
            let y = simulate_ou_subordinator(&p, &grid, &RngSpec::new(5, stream)).unwrap();
            for (t, v) in grid.times().iter().zip(y.values()) {
                assert!(*v >= (-0.5 * t).exp());
            }
            assert!(y.values().iter().all(|v| *v >= (-0.5f64).exp()));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(OuParams::exponential_jumps(0.0, 0.5, 1.0, 1.0).is_err());
        assert!(OuParams::exponential_jumps(1.0, -0.5, 1.0, 1.0).is_err());
        assert!(OuParams::new(1.0, 0.5, LevyMeasure::atomic(&[(-0.1, 1.0)])).is_err());
    }
}
