use num_complex::Complex64;

use super::{truncation, LevyError, LevyTriplet, Region};

impl LevyTriplet {
    /// Characteristic exponent `ψ(u) = iub − u²c/2 + ∫(e^{iux} − 1 − iuh(x)) F(dx)`.
    pub fn characteristic_exponent(&self, u: f64, tol: f64) -> Result<Complex64, LevyError> {
        self.exponent_at(Complex64::new(u, 0.0), tol)
    }

    /// The exponent at a complex argument, i.e. its analytic continuation.
    /// `ψ(-i)` is the exponential compensator rate whenever it exists.
    pub fn exponent_at(&self, u: Complex64, tol: f64) -> Result<Complex64, LevyError> {
        let i = Complex64::i();
        let mut psi = i * u * self.b - u * u * (self.c / 2.0);
        if self.measure.is_zero() {
            return Ok(psi);
        }
        let integrand = |x: f64| i * u * x;
        let re = self.measure.integrate(
            |x| {
                exp_m1(integrand(x)).re + (u * truncation(x)).im
            },
            tol / 2.0,
        )?;
        let im = self.measure.integrate(
            |x| {
                exp_m1(integrand(x)).im - (u * truncation(x)).re
            },
            tol / 2.0,
        )?;
        psi += Complex64::new(re.value, im.value);
        Ok(psi)
    }

    /// `κ(1) = b + c/2 + ∫(e^x − 1 − h(x)) F(dx)`, so that
    /// `E[e^{V_T}] = exp(T κ(1))`.
    pub fn exponential_compensator_rate(&self, tol: f64) -> Result<f64, LevyError> {
        if !self.measure.exponential_moment_finite() {
            return Err(LevyError::ExponentialMomentInfinite);
        }
        let jumps = self
            .measure
            .integrate_over(|x| x.exp_m1() - truncation(x), Region::all(), tol)?;
        Ok(self.b + 0.5 * self.c + jumps.value)
    }
}

/// `e^z − 1`, accurate for small `|z|`: the real part is formed as
/// `(e^a − 1) cos b − 2 sin²(b/2)`, so `cos b − 1` never cancels.
fn exp_m1(z: Complex64) -> Complex64 {
    let half = (z.im / 2.0).sin();
    Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * half * half,
        z.re.exp() * z.im.sin(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevyMeasure, DEFAULT_TOL};

    #[test]
    fn brownian_and_drift() {
        let bm = LevyTriplet::diffusion(0.0, 1.0).unwrap();
        let psi = bm.characteristic_exponent(2.0, DEFAULT_TOL).unwrap();
        assert_eq!(psi, Complex64::new(-2.0, 0.0));
        let drift = LevyTriplet::diffusion(0.3, 0.0).unwrap();
        let psi = drift.characteristic_exponent(1.0, DEFAULT_TOL).unwrap();
        assert_eq!(psi, Complex64::new(0.0, 0.3));
    }

    #[test]
    fn compensator_rate_examples() {
        let t = LevyTriplet::diffusion(-0.5, 1.0).unwrap();
        assert_eq!(t.exponential_compensator_rate(DEFAULT_TOL).unwrap(), 0.0);
        let t = LevyTriplet::diffusion(0.05, 0.04).unwrap();
        assert!((t.exponential_compensator_rate(DEFAULT_TOL).unwrap() - 0.07).abs() < 1e-15);
        let t = LevyTriplet::new(0.0, 0.0, LevyMeasure::atomic(&[(2f64.ln(), 1.0)])).unwrap();
        let k = t.exponential_compensator_rate(DEFAULT_TOL).unwrap();
        assert!((k - 0.306_852_819_440_054_7).abs() < 1e-15);
        let t = LevyTriplet::new(0.0, 0.0, LevyMeasure::cgmy(1.0, 5.0, 0.5, 0.5)).unwrap();
        assert_eq!(
            t.exponential_compensator_rate(DEFAULT_TOL),
            Err(LevyError::ExponentialMomentInfinite)
        );
    }

    #[test]
    fn continuation_at_minus_i_matches_rate() {
        let t = LevyTriplet::diffusion(0.05, 0.04).unwrap();
        let psi = t.exponent_at(Complex64::new(0.0, -1.0), DEFAULT_TOL).unwrap();
        assert_eq!(psi.re, 0.05 + 0.02);
        assert_eq!(psi.im, 0.0);
        let t = LevyTriplet::new(0.01, 0.02, LevyMeasure::cgmy(1.0, 5.0, 5.0, 0.5)).unwrap();
        let psi = t.exponent_at(Complex64::new(0.0, -1.0), DEFAULT_TOL).unwrap();
        let k = t.exponential_compensator_rate(DEFAULT_TOL).unwrap();
        assert!((psi.re - k).abs() < 1e-9 && psi.im.abs() < 1e-12);
    }
}
