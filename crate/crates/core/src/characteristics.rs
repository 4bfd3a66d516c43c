//! Local characteristics `(b, c, F; A_t = t)` of the log-price as
//! deterministic functionals of a factor path.
//!
//! Everything is evaluated at the left endpoint of each grid cell, so the
//! discretized characteristics stay predictable.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levy::{JumpKernel, JumpWeight, LevyError, LevyTriplet, Quantity, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharacteristicsError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("volatility must be positive, got {value} on cell {cell}")]
    NonPositiveSigma { cell: usize, value: f64 },
    #[error("time change clock is negative ({value}) at grid index {index}")]
    NegativeClock { index: usize, value: f64 },
    #[error("invalid characteristics: {0}")]
    Invalid(String),
    #[error("factor path I/O: {0}")]
    Io(String),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

/// Strictly increasing time points `t_0 < t_1 < … < t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Arc<[f64]>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, CharacteristicsError> {
        if times.len() < 2 {
            return Err(CharacteristicsError::InvalidGrid(
                "need at least two time points".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(CharacteristicsError::InvalidGrid("non-finite time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CharacteristicsError::InvalidGrid(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(TimeGrid(times.into()))
    }

    /// `n` equal steps on `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self, CharacteristicsError> {
        if n == 0 || !(horizon > 0.0) {
            return Err(CharacteristicsError::InvalidGrid(
                "uniform grid needs n >= 1 and a positive horizon".into(),
            ));
        }
        let dt = horizon / n as f64;
        let mut t: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        t[n] = horizon;
        Self::new(t)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.0.len() - 1
    }

    #[inline]
    pub fn dt(&self, cell: usize) -> f64 {
        self.0[cell + 1] - self.0[cell]
    }

    pub fn start(&self) -> f64 {
        self.0[0]
    }

    pub fn horizon(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Splits every cell into `factor` equal sub-cells.
    pub fn refine(&self, factor: usize) -> Self {
        let mut out = Vec::with_capacity(self.cells() * factor + 1);
        for w in self.0.windows(2) {
            let step = (w[1] - w[0]) / factor as f64;
            out.extend((0..factor).map(|k| w[0] + k as f64 * step));
        }
        out.push(self.horizon());
        TimeGrid(out.into())
    }
}

/// Discretized path of the factor `Y`, one value per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorPathRepr", into = "FactorPathRepr")]
pub struct FactorPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorPathRepr {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<FactorPathRepr> for FactorPath {
    type Error = CharacteristicsError;

    fn try_from(r: FactorPathRepr) -> Result<Self, Self::Error> {
        FactorPath::new(TimeGrid::new(r.t)?, r.y)
    }
}

impl From<FactorPath> for FactorPathRepr {
    fn from(p: FactorPath) -> Self {
        FactorPathRepr {
            t: p.grid.times().to_vec(),
            y: p.values,
        }
    }
}

impl FactorPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self, CharacteristicsError> {
        if values.len() != grid.len() {
            return Err(CharacteristicsError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CharacteristicsError::Invalid("non-finite factor value".into()));
        }
        Ok(FactorPath { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Result<Self, CharacteristicsError> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation between grid points, flat outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let times = self.grid.times();
        if t <= times[0] {
            return self.values[0];
        }
        if t >= self.grid.horizon() {
            return self.values[self.values.len() - 1];
        }
        let i = times.partition_point(|&s| s <= t) - 1;
        if times[i] == t {
            return self.values[i];
        }
        let w = (t - times[i]) / (times[i + 1] - times[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Writes `t,y` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CharacteristicsError> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CharacteristicsError::Io(e.to_string());
        wtr.write_record(["t", "y"]).map_err(io)?;
        for (t, y) in self.grid.times().iter().zip(&self.values) {
            wtr.write_record([format!("{t:?}"), format!("{y:?}")])
                .map_err(io)?;
        }
        wtr.flush()
            .map_err(|e| CharacteristicsError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, CharacteristicsError> {
        let mut rdr = csv::Reader::from_reader(r);
        let io = |e: csv::Error| CharacteristicsError::Io(e.to_string());
        let headers = rdr.headers().map_err(io)?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "y" {
            return Err(CharacteristicsError::Io(
                "expected columns `t,y`".into(),
            ));
        }
        let (mut t, mut y) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(io)?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CharacteristicsError::Io(format!("bad number `{s}`: {e}")))
            };
            t.push(parse(&rec[0])?);
            y.push(parse(&rec[1])?);
        }
        FactorPath::new(TimeGrid::new(t)?, y)
    }
}

/// Per-cell rates of the characteristics of `X` with `A_t = t`. The jump
/// kernel on cell `i` is `scale_i · W(i, x) · F(dx)`.
#[derive(Debug, Clone)]
pub struct LocalCharacteristics {
    grid: TimeGrid,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    scale: Vec<f64>,
    kernel: JumpKernel,
    weight: JumpWeight,
}

/// Left-point Riemann sums of `B`, `C` and `∫(1 ∧ x²) dν` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratedCharacteristics {
    pub drift: f64,
    pub diffusion: f64,
    pub jump_mass: f64,
}

impl LocalCharacteristics {
    pub fn new(
        grid: TimeGrid,
        drift: Vec<f64>,
        diffusion: Vec<f64>,
        scale: Vec<f64>,
        kernel: JumpKernel,
        weight: JumpWeight,
    ) -> Result<Self, CharacteristicsError> {
        let n = grid.cells();
        for v in [&drift, &diffusion, &scale] {
            if v.len() != n {
                return Err(CharacteristicsError::LengthMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if drift.iter().any(|b| !b.is_finite()) {
            return Err(CharacteristicsError::Invalid("non-finite drift".into()));
        }
        if diffusion.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(CharacteristicsError::Invalid(
                "diffusion rates must be finite and >= 0".into(),
            ));
        }
        if scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(CharacteristicsError::Invalid(
                "jump scales must be finite and >= 0".into(),
            ));
        }
        Ok(LocalCharacteristics {
            grid,
            drift,
            diffusion,
            scale,
            kernel,
            weight,
        })
    }

    /// Constant characteristics of a Lévy process with the given triplet.
    pub fn levy(grid: TimeGrid, triplet: &LevyTriplet) -> Result<Self, CharacteristicsError> {
        triplet.validate()?;
        let kernel = JumpKernel::new(triplet.measure.clone(), DEFAULT_TOL);
        Self::levy_with_kernel(grid, triplet.b, triplet.c, kernel)
    }

    pub fn levy_with_kernel(
        grid: TimeGrid,
        b: f64,
        c: f64,
        kernel: JumpKernel,
    ) -> Result<Self, CharacteristicsError> {
        let n = grid.cells();
        Self::new(
            grid,
            vec![b; n],
            vec![c; n],
            vec![1.0; n],
            kernel,
            JumpWeight::Identity,
        )
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn weight(&self) -> &JumpWeight {
        &self.weight
    }

    /// Whether the kernel carries any jumps at all.
    pub fn has_jumps(&self) -> bool {
        !self.kernel.measure().is_zero() && self.scale.iter().any(|s| *s > 0.0)
    }

    /// `∫ q(x, U(i, x)) W(i, x) F(dx)` for every cell (without the scale).
    pub fn jump_integrals(
        &self,
        u: &JumpWeight,
        q: Quantity,
    ) -> Result<Vec<f64>, LevyError> {
        self.kernel
            .integral_cells(self.cells(), &self.weight, u, q)
    }

    /// Same data with a different drift and kernel weight.
    pub(crate) fn with_drift_and_weight(&self, drift: Vec<f64>, weight: JumpWeight) -> Self {
        LocalCharacteristics {
            drift,
            weight,
            ..self.clone()
        }
    }

    /// Replaces the drift vector; used to build deliberately perturbed models.
    pub fn with_drift(&self, drift: Vec<f64>) -> Result<Self, CharacteristicsError> {
        Self::new(
            self.grid.clone(),
            drift,
            self.diffusion.clone(),
            self.scale.clone(),
            self.kernel.clone(),
            self.weight.clone(),
        )
    }

    pub fn integrate(&self) -> Result<IntegratedCharacteristics, LevyError> {
        let mass = self.jump_integrals(&JumpWeight::Identity, Quantity::TruncatedSecondMoment)?;
        let mut out = IntegratedCharacteristics {
            drift: 0.0,
            diffusion: 0.0,
            jump_mass: 0.0,
        };
        for i in 0..self.cells() {
            let dt = self.grid.dt(i);
            out.drift += self.drift[i] * dt;
            out.diffusion += self.diffusion[i] * dt;
            out.jump_mass += self.scale[i] * dt * mass[i];
        }
        Ok(out)
    }
}

/// Characteristics of `X = ∫γ(Y, s) ds + σ(Y) · W`: `b_i = γ(Y, t_i)`,
/// `c_i = σ(Y, t_i)²`, no jumps.
pub fn bs_factor_characteristics<G, S>(
    gamma: G,
    sigma: S,
    path: &FactorPath,
) -> Result<LocalCharacteristics, CharacteristicsError>
where
    G: Fn(&FactorPath, f64) -> f64,
    S: Fn(&FactorPath, f64) -> f64,
{
    let grid = path.grid().clone();
    let n = grid.cells();
    let mut drift = Vec::with_capacity(n);
    let mut diffusion = Vec::with_capacity(n);
    for (i, &t) in grid.times()[..n].iter().enumerate() {
        let s = sigma(path, t);
        if !(s > 0.0) || !s.is_finite() {
            return Err(CharacteristicsError::NonPositiveSigma { cell: i, value: s });
        }
        drift.push(gamma(path, t));
        diffusion.push(s * s);
    }
    LocalCharacteristics::new(
        grid,
        drift,
        diffusion,
        vec![0.0; n],
        JumpKernel::new(crate::levy::LevyMeasure::Zero, DEFAULT_TOL),
        JumpWeight::Identity,
    )
}

/// `X_t = μ t + V_{∫_0^t Y_{s-} ds}` for a Lévy process `V`, holding one
/// jump kernel that is shared by every factor path it is applied to.
#[derive(Debug, Clone)]
pub struct TimeChange {
    pub mu: f64,
    pub b: f64,
    pub c: f64,
    kernel: JumpKernel,
}

impl TimeChange {
    pub fn new(mu: f64, triplet: &LevyTriplet) -> Result<Self, CharacteristicsError> {
        triplet.validate()?;
        if !mu.is_finite() {
            return Err(CharacteristicsError::Invalid("mu must be finite".into()));
        }
        Ok(TimeChange {
            mu,
            b: triplet.b,
            c: triplet.c,
            kernel: JumpKernel::new(triplet.measure.clone(), DEFAULT_TOL),
        })
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn triplet(&self) -> LevyTriplet {
        LevyTriplet {
            b: self.b,
            c: self.c,
            measure: self.kernel.measure().clone(),
        }
    }

    /// `b_i = μ + b^V Y_{i−}`, `c_i = c^V Y_{i−}`, `scale_i = Y_{i−}`.
    pub fn characteristics(
        &self,
        path: &FactorPath,
    ) -> Result<LocalCharacteristics, CharacteristicsError> {
        if let Some((index, &value)) = path.values().iter().enumerate().find(|(_, y)| **y < 0.0) {
            return Err(CharacteristicsError::NegativeClock { index, value });
        }
        let n = path.grid().cells();
        let left = &path.values()[..n];
        LocalCharacteristics::new(
            path.grid().clone(),
            left.iter().map(|y| self.mu + self.b * y).collect(),
            left.iter().map(|y| self.c * y).collect(),
            left.to_vec(),
            self.kernel.clone(),
            JumpWeight::Identity,
        )
    }
}

/// One-shot form of [`TimeChange::characteristics`].
pub fn time_change_characteristics(
    mu: f64,
    triplet: &LevyTriplet,
    path: &FactorPath,
) -> Result<LocalCharacteristics, CharacteristicsError> {
    TimeChange::new(mu, triplet)?.characteristics(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasure;

    fn unit_grid(n: usize) -> TimeGrid {
        TimeGrid::uniform(1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
        let g = unit_grid(4);
        assert_eq!(g.cells(), 4);
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.refine(3).cells(), 12);
    }

    #[test]
    fn bs_factor_constant_coefficients() {
        let path = FactorPath::constant(unit_grid(10), 0.0).unwrap();
        let lc = bs_factor_characteristics(|_, _| 0.1, |_, _| 0.2, &path).unwrap();
        assert!(lc.drift().iter().all(|b| *b == 0.1));
        assert!(lc.diffusion().iter().all(|c| (*c - 0.04).abs() < 1e-17));
        assert!(!lc.has_jumps());
        let std = bs_factor_characteristics(|_, _| 0.0, |_, _| 1.0, &path).unwrap();
        assert!(std.diffusion().iter().all(|c| *c == 1.0));
        let err = bs_factor_characteristics(|_, _| 0.0, |_, _| 0.0, &path).unwrap_err();
        assert!(matches!(err, CharacteristicsError::NonPositiveSigma { cell: 0, .. }));
    }

    #[test]
    fn bs_factor_sigma_from_deterministic_ou_decay() {
        let grid = unit_grid(20);
        let values = grid.times().iter().map(|t| (-0.5 * t).exp()).collect();
        let path = FactorPath::new(grid, values).unwrap();
        let lc = bs_factor_characteristics(|_, _| 0.0, |p, t| p.value_at(t), &path).unwrap();
        for (i, c) in lc.diffusion().iter().enumerate() {
            assert_eq!(*c, path.values()[i].powi(2));
            assert!(*c >= (-1.0f64).exp());
        }
    }

    #[test]
    fn time_change_examples() {
        let grid = unit_grid(5);
        let path = FactorPath::constant(grid.clone(), 2.0).unwrap();
        let tv = LevyTriplet::diffusion(0.1, 0.3).unwrap();
        let lc = time_change_characteristics(0.05, &tv, &path).unwrap();
        for i in 0..5 {
            assert!((lc.drift()[i] - 0.25).abs() < 1e-15);
            assert!((lc.diffusion()[i] - 0.6).abs() < 1e-15);
            assert_eq!(lc.scale()[i], 2.0);
        }
        let cgmy = LevyTriplet::new(0.0, 0.0, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5)).unwrap();
        let lc = time_change_characteristics(0.0, &cgmy, &path).unwrap();
        assert!(lc.drift().iter().chain(lc.diffusion()).all(|v| *v == 0.0));
        assert!(lc.scale().iter().all(|s| *s == 2.0));
        let neg = FactorPath::new(grid.clone(), vec![1.0, 1.0, -0.1, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            time_change_characteristics(0.0, &tv, &neg),
            Err(CharacteristicsError::NegativeClock { index: 2, .. })
        ));
    }

    #[test]
    fn unit_clock_reproduces_triplet() {
        let tv = LevyTriplet::new(0.07, 0.2, LevyMeasure::atomic(&[(0.4, 1.5)])).unwrap();
        let path = FactorPath::constant(unit_grid(8), 1.0).unwrap();
        let lc = time_change_characteristics(0.0, &tv, &path).unwrap();
        let levy = LocalCharacteristics::levy(unit_grid(8), &tv).unwrap();
        assert_eq!(lc.drift(), levy.drift());
        assert_eq!(lc.diffusion(), levy.diffusion());
        assert_eq!(lc.scale(), levy.scale());
    }

    #[test]
    fn integrated_examples() {
        let path = FactorPath::constant(unit_grid(7), 0.0).unwrap();
        let lc = bs_factor_characteristics(|_, _| 0.1, |_, _| 0.2, &path).unwrap();
        let tot = lc.integrate().unwrap();
        assert!((tot.drift - 0.1).abs() < 1e-15);
        assert!((tot.diffusion - 0.04).abs() < 1e-15);
        assert_eq!(tot.jump_mass, 0.0);

        let zero = LocalCharacteristics::new(
            unit_grid(3),
            vec![0.0; 3],
            vec![0.0; 3],
            vec![0.0; 3],
            JumpKernel::new(LevyMeasure::Zero, DEFAULT_TOL),
            JumpWeight::Identity,
        )
        .unwrap();
        let tot = zero.integrate().unwrap();
        assert_eq!((tot.drift, tot.diffusion, tot.jump_mass), (0.0, 0.0, 0.0));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let grid = TimeGrid::new(vec![0.0, 0.25, 0.6, 1.0]).unwrap();
        let path = FactorPath::new(grid, vec![1.0, 0.3, 1e-17, 2.5]).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(FactorPath::read_csv(buf.as_slice()).unwrap(), path);
        let json = serde_json::to_string(&path).unwrap();
        assert_eq!(serde_json::from_str::<FactorPath>(&json).unwrap(), path);
        assert!(serde_json::from_str::<FactorPath>(r#"{"t":[0,1,0.5],"y":[1,1,1]}"#).is_err());
    }

    #[test]
    fn value_at_interpolates() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let path = FactorPath::new(grid, vec![0.0, 2.0, -2.0]).unwrap();
        assert_eq!(path.value_at(0.5), 1.0);
        assert_eq!(path.value_at(1.0), 2.0);
        assert_eq!(path.value_at(1.75), -1.0);
        assert_eq!(path.value_at(9.0), -2.0);
    }
}
