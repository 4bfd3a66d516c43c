use serde::Serialize;

use crate::characteristics::LocalCharacteristics;
use crate::girsanov::{martingale_drift_rate, GirsanovPair};
use crate::levy::{JumpWeight, LevyMeasure, Quantity};

use super::VerifyError;

/// `E[e^{X_T} | factor path] = exp(Σ κ_i Δt_i)` with `κ_i` the martingale
/// drift rate of cell `i`.
pub fn conditional_oracle(lc: &LocalCharacteristics) -> Result<f64, VerifyError> {
    let rates = martingale_drift_rate(lc)?;
    let grid = lc.grid();
    Ok(rates
        .iter()
        .enumerate()
        .map(|(i, r)| r * grid.dt(i))
        .sum::<f64>()
        .exp())
}

/// Truncated Poisson-series value of `E[Z_T e^{X_T}]` with its truncation
/// error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesOracle {
    pub value: f64,
    pub tail_bound: f64,
    pub max_count: usize,
}

/// Brute-force enumeration of `E[Z_T e^{X_T}]` for an atomic measure and a
/// jump weight that is the same on every cell: the jump counts at the atoms
/// are independent Poisson variables, and every count vector with total at
/// most `max_count` is summed explicitly.
pub fn poisson_series_oracle(
    lc: &LocalCharacteristics,
    pair: &GirsanovPair,
    max_count: usize,
) -> Result<SeriesOracle, VerifyError> {
    let atoms = match lc.kernel().measure() {
        LevyMeasure::FiniteAtomic { atoms } => atoms.clone(),
        LevyMeasure::Zero => Vec::new(),
        _ => {
            return Err(VerifyError::OracleUnsupported(
                "the Poisson series needs an atomic Lévy measure".into(),
            ))
        }
    };
    if !pair.u.is_homogeneous() {
        return Err(VerifyError::OracleUnsupported(
            "the Poisson series needs a jump weight that is constant across cells".into(),
        ));
    }
    let grid = lc.grid();
    let w = lc.weight();
    let n = lc.cells();
    let (h_comp, u_comp) = if atoms.is_empty() {
        (vec![0.0; n], vec![0.0; n])
    } else {
        (
            lc.kernel()
                .integral_cells(n, w, &JumpWeight::Identity, Quantity::CompensationMiddle(0.0))?,
            lc.kernel()
                .integral_cells(n, w, &pair.u, Quantity::CompensatorAbove(0.0))?,
        )
    };
    let mut log_d = 0.0;
    let mut lambda = vec![0.0; atoms.len()];
    for i in 0..n {
        let dt = grid.dt(i);
        let clock = lc.scale()[i] * dt;
        let b = pair.beta.at(i);
        log_d += lc.drift()[i] * dt - clock * h_comp[i] - clock * u_comp[i]
            + (b + 0.5) * lc.diffusion()[i] * dt;
        for (k, a) in atoms.iter().enumerate() {
            lambda[k] += clock * a.mass * w.eval(i, a.x);
        }
    }
    let growth: Vec<f64> = atoms
        .iter()
        .map(|a| a.x.exp() * pair.u.eval(0, a.x))
        .collect();

    let mut counts = vec![0usize; atoms.len()];
    let sum = enumerate(&lambda, &growth, &mut counts, 0, max_count);
    let d = log_d.exp();
    let total_lambda: f64 = lambda.iter().sum();
    let weighted: f64 = lambda.iter().zip(&growth).map(|(l, g)| l * g).sum();
    let tail = poisson_upper_tail(weighted, max_count);
    Ok(SeriesOracle {
        value: d * sum,
        tail_bound: d * (weighted - total_lambda).exp() * tail,
        max_count,
    })
}

/// `Σ_{|n| <= budget} Π_k P(N_k = n_k) g_k^{n_k}` over counts at atoms `k..`.
fn enumerate(lambda: &[f64], growth: &[f64], counts: &mut [usize], k: usize, budget: usize) -> f64 {
    if k == lambda.len() {
        return counts
            .iter()
            .enumerate()
            .map(|(j, &c)| poisson_pmf(lambda[j], c) * growth[j].powi(c as i32))
            .product();
    }
    let mut s = 0.0;
    for c in 0..=budget {
        counts[k] = c;
        s += enumerate(lambda, growth, counts, k + 1, budget - c);
    }
    counts[k] = 0;
    s
}

fn poisson_pmf(lambda: f64, k: usize) -> f64 {
    let mut p = (-lambda).exp();
    for j in 1..=k {
        p *= lambda / j as f64;
    }
    p
}

/// `P(N > m)` for `N ~ Poisson(λ)`, summed term by term.
fn poisson_upper_tail(lambda: f64, m: usize) -> f64 {
    let mut term = poisson_pmf(lambda, m);
    let mut sum = 0.0;
    let mut j = m;
    loop {
        j += 1;
        term *= lambda / j as f64;
        sum += term;
        if (j as f64) > lambda && term < 1e-17 * sum.max(1e-300) {
            break;
        }
        if j > m + 100_000 {
            break;
        }
    }
    sum
}
