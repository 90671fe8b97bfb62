//! Gaussian Ornstein-Uhlenbeck reference paths by the exact recursion.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{check_rates, check_times, EnsembleMeta, InitialValue, PathEnsemble};
use crate::error::{domain, Result};
use crate::rng::RngSeed;

/// Y(t_{k+1}) = e^{-λΔ} Y(t_k) + η_k with Var η_k = σ²(1 - e^{-2λΔ})/(2λ).
///
/// Non-stationary paths start from ξ at time 0; stationary paths draw
/// Y(t_0) ~ N(0, σ²/(2λ)) and ignore ξ.
pub fn simulate_gaussian_ou(
    xi: InitialValue,
    lambda: f64,
    sigma: f64,
    times: &[f64],
    n: usize,
    seed: RngSeed,
    stationary: bool,
) -> Result<PathEnsemble> {
    check_times(times)?;
    check_rates(lambda, sigma)?;
    xi.validate()?;
    if !stationary && times[0] < 0.0 {
        return domain("times must be nonnegative");
    }
    let m = times.len();
    let initial = xi.sample(n, seed);
    let var_step = |dt: f64| sigma * sigma * (-(-2.0 * lambda * dt).exp_m1()) / (2.0 * lambda);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut z = vec![0.0; m];
            seed.fill_normals(i as u64, &mut z);
            let mut row = Vec::with_capacity(m);
            let mut y = if stationary {
                sigma / (2.0 * lambda).sqrt() * z[0]
            } else {
                let t0 = times[0];
                (-lambda * t0).exp() * initial[i] + var_step(t0).sqrt() * z[0]
            };
            row.push(y);
            for k in 1..m {
                let dt = times[k] - times[k - 1];
                y = (-lambda * dt).exp() * y + var_step(dt).sqrt() * z[k];
                row.push(y);
            }
            row
        })
        .collect();
    let values = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    Ok(PathEnsemble {
        values,
        times: times.to_vec(),
        meta: EnsembleMeta {
            hurst: None,
            seed,
            scheme: if stationary { "gaussian-ou-stationary" } else { "gaussian-ou" }.into(),
            grid: "exact recursion".into(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::covariance_with_error;

    #[test]
    fn stationary_covariance() {
        let times = [0.0, 0.5, 2.0];
        let e = simulate_gaussian_ou(InitialValue::default(), 1.0, 1.0, &times, 40_000, RngSeed::new(9, 0), true).unwrap();
        for j in 0..3 {
            let (c, se) = covariance_with_error(&e.column(0), &e.column(j));
            let want = 0.5 * (-times[j]).exp();
            assert!((c - want).abs() < 4.0 * se, "lag {}: {c} vs {want}", times[j]);
        }
    }

    #[test]
    fn zero_start_at_zero() {
        let e = simulate_gaussian_ou(InitialValue::default(), 1.0, 1.0, &[0.0, 1.0], 10, RngSeed::new(9, 0), false).unwrap();
        assert!(e.column(0).iter().all(|&x| x == 0.0));
    }
}
