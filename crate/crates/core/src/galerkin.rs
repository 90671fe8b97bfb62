//! Cell-averaged Riesz kernels |u - v|^p on a one-dimensional cell layout.
//!
//! For cells I = [a, b] and J = [c, d] the double integral of |u-v|^p has the
//! closed form Φ(b-c) - Φ(a-c) - Φ(b-d) + Φ(a-d) with
//! Φ(x) = |x|^{p+2}/((p+1)(p+2)). Far apart cells use a moment expansion
//! instead, which avoids the cancellation of the four-term formula.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::kernel::KernelSpec;

fn phi(x: f64, p: f64) -> f64 {
    x.abs().powf(p + 2.0) / ((p + 1.0) * (p + 2.0))
}

/// ∫_a^b ∫_c^d |u - v|^p dv du for p > -1.
pub fn riesz_box(a: f64, b: f64, c: f64, d: f64, p: f64) -> f64 {
    let wi = b - a;
    let wj = d - c;
    let x = 0.5 * (c + d) - 0.5 * (a + b);
    let wmax = wi.max(wj);
    if x.abs() >= 64.0 * wmax {
        let x2 = x * x;
        let m2 = (wi * wi + wj * wj) / 12.0;
        let m4 = (wi.powi(4) + wj.powi(4)) / 80.0 + wi * wi * wj * wj / 24.0;
        let c2 = p * (p - 1.0) / 2.0;
        let c4 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 24.0;
        return wi * wj * x.abs().powf(p) * (1.0 + c2 * m2 / x2 + c4 * m4 / (x2 * x2));
    }
    phi(b - c, p) - phi(a - c, p) - phi(b - d, p) + phi(a - d, p)
}

/// Matrix of cell-pair averages (1/(w_i w_j)) ∫_{I_i}∫_{I_j} |u-v|^p.
pub fn riesz_average_matrix(edges: &[f64], p: f64) -> DMatrix<f64> {
    let n = edges.len() - 1;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (edges[i], edges[i + 1]);
            let wi = b - a;
            (0..n)
                .map(|j| {
                    let (c, d) = (edges[j], edges[j + 1]);
                    if i == j {
                        2.0 * wi.powf(p) / ((p + 1.0) * (p + 2.0))
                    } else if j < i {
                        // filled from the upper triangle below
                        0.0
                    } else {
                        riesz_box(a, b, c, d, p) / (wi * (d - c))
                    }
                })
                .collect()
        })
        .collect();
    let mut m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// Exact cell integrals ∫_{I_j} f of a kernel over the given edges.
pub fn cell_integrals(f: &KernelSpec, edges: &[f64]) -> DVector<f64> {
    DVector::from_iterator(edges.len() - 1, edges.windows(2).map(|w| f.integral_over(w[0], w[1])))
}

/// Cell widths.
pub fn widths(edges: &[f64]) -> Vec<f64> {
    edges.windows(2).map(|w| w[1] - w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_formula_switch_is_continuous() {
        let p = -0.4;
        let w = 0.01;
        for k in [60.0, 63.9, 64.0, 64.1, 70.0] {
            let c = k * w;
            let closed = phi(w - c, p) - phi(-c, p) - phi(w - c - w, p) + phi(-c - w, p);
            let got = riesz_box(0.0, w, c, c + w, p);
            assert!((got - closed).abs() < 1e-9 * got, "k={k}: {got} vs {closed}");
        }
    }

    #[test]
    fn averages_sum_to_square_integral() {
        let edges: Vec<f64> = (0..=50).map(|i| (i as f64 / 50.0).powi(2)).collect();
        for p in [-0.9, -0.3, 0.0] {
            let m = riesz_average_matrix(&edges, p);
            let w = widths(&edges);
            let mut total = 0.0;
            for i in 0..w.len() {
                for j in 0..w.len() {
                    total += w[i] * w[j] * m[(i, j)];
                }
            }
            let want = 2.0 / ((p + 1.0) * (p + 2.0));
            assert!((total - want).abs() < 1e-11 * want, "p={p}: {total} vs {want}");
            assert_eq!(m, m.transpose());
        }
    }
}
