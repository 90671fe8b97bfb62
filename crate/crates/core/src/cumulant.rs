//! Cumulants of Wiener-Rosenblatt integrals and of second-chaos quadratic
//! forms, the chi-square limit cumulants, the stationary integral I(K) and
//! the Gaussian limit variance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{accuracy, domain, Result};
use crate::galerkin::{cell_integrals, riesz_average_matrix};
use crate::kernel::{integral_of_f, Estimate, HurstIndex, KernelSpec};
use crate::quad::{integrate_from, integrate_left_singular, pair_integral, GridSpec, Resolution};
use crate::special::gamma;

/// Cumulants k_m, m ∈ {1, 2, 3, 4}, with error estimates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector {
    pub entries: BTreeMap<usize, f64>,
    pub error_estimates: BTreeMap<usize, f64>,
}

impl CumulantVector {
    pub fn insert(&mut self, m: usize, value: f64, error: f64) {
        self.entries.insert(m, value);
        self.error_estimates.insert(m, error);
    }

    pub fn get(&self, m: usize) -> Option<f64> {
        self.entries.get(&m).copied()
    }

    pub fn error(&self, m: usize) -> Option<f64> {
        self.error_estimates.get(&m).copied()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// c_{1,m} = 2^{m/2-1} (m-1)! (H(2H-1))^{m/2}.
pub fn c1m(h: f64, m: usize) -> f64 {
    let mf = m as f64;
    2f64.powf(mf / 2.0 - 1.0) * factorial(m - 1) * (h * (2.0 * h - 1.0)).powf(mf / 2.0)
}

/// 2^{m-1}(m-1)! Σ λ_i^m for the second-chaos variable ξᵀAξ - tr A.
pub fn cumulant_quadratic_form(a: &DMatrix<f64>, m: usize) -> Result<f64> {
    if m == 0 {
        return domain("cumulant order must be at least 1");
    }
    check_symmetric(a)?;
    if m == 1 {
        return Ok(0.0);
    }
    let eig = SymmetricEigen::new(a.clone());
    let s: f64 = eig.eigenvalues.iter().map(|l| l.powi(m as i32)).sum();
    Ok(2f64.powi(m as i32 - 1) * factorial(m - 1) * s)
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return domain("matrix must be square");
    }
    let scale = a.amax();
    for i in 0..a.nrows() {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return domain(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    Ok(())
}

/// Target cumulants of (1/√2)(∫f)(Z² - 1).
pub fn chi2_limit_cumulants(f: &KernelSpec, m: usize) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    let mf = m as f64;
    2f64.powf(mf / 2.0 - 1.0) * factorial(m - 1) * integral_of_f(f).powi(m as i32)
}

/// The two parts (I₁, I₂) of
/// I(K) = H(2H-1) ∫_0^∞∫_0^∞ e^{-λu} e^{-λv} |u - v - K|^{2H-2} du dv.
pub fn integral_i_parts(k: f64, h: HurstIndex, lambda: f64) -> Result<(f64, f64)> {
    let hv = h.require_process()?;
    if !(k >= 0.0) || !k.is_finite() {
        return domain(format!("I(K) needs finite K >= 0, got {k}"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("I(K) needs λ > 0, got {lambda}"));
    }
    let p = 2.0 * hv - 2.0;
    let pre = hv * (2.0 * hv - 1.0) / (2.0 * lambda);
    let i1 = hv * gamma(2.0 * hv) * (-lambda * k).exp() / (2.0 * lambda.powf(2.0 * hv));
    let res = Resolution::FINE;
    let near = integrate_left_singular(|u: f64| (lambda * (u - k)).exp() * u.powf(p), 0.0, k, p, res);
    // e^{λK} ∫_K^∞ e^{-λu} u^p du, with the tail past K + 60/λ dropped
    let upper = k + 60.0 / lambda;
    let far_integrand = |u: f64| (-lambda * (u - k)).exp() * u.powf(p);
    let far = if k == 0.0 {
        integrate_left_singular(far_integrand, 0.0, upper, p, res)
    } else {
        let levels = (((upper - k) / k).log2().ceil().max(0.0) as usize + 4).min(60);
        integrate_left_singular(far_integrand, k, upper, 0.0, Resolution { levels, ..res })
    };
    Ok((i1, pre * (near + far)))
}

/// I(K) for K ≥ 0.
pub fn integral_i(k: f64, h: HurstIndex, lambda: f64) -> Result<f64> {
    let (a, b) = integral_i_parts(k, h, lambda)?;
    Ok(a + b)
}

/// Limit variance of ∫ f dZ^H as H ↓ 1/2: ∫f² for f supported in [0, ∞),
/// or σ² Σ α_j α_k e^{-λ|t_j - t_k|}/(2λ) for a stationary combination.
pub fn gaussian_limit_variance(f: &KernelSpec, lambda_hint: Option<f64>) -> Result<f64> {
    let atoms: Vec<_> = f.atoms.iter().filter(|a| a.weight != 0.0).collect();
    if let Some(l) = lambda_hint {
        if !(l > 0.0) {
            return domain(format!("λ hint must be positive, got {l}"));
        }
    }
    if atoms.iter().all(|a| !a.is_stationary() && a.left_end >= 0.0) {
        let mut acc = 0.0;
        for a in &atoms {
            for b in &atoms {
                let lo = a.left_end.max(b.left_end);
                let hi = a.right_end.min(b.right_end);
                if hi <= lo {
                    continue;
                }
                let mu = a.decay + b.decay;
                let top = a.weight * b.weight * (-a.decay * (a.right_end - hi) - b.decay * (b.right_end - hi)).exp();
                let len = hi - lo;
                acc += if mu == 0.0 { top * len } else { top * (-(-mu * len).exp_m1()) / mu };
            }
        }
        return Ok(acc);
    }
    if atoms.iter().all(|a| a.is_stationary()) {
        let lambda = atoms[0].decay;
        if atoms.iter().any(|a| a.decay != lambda) {
            return domain("stationary combination needs a common decay rate");
        }
        if let Some(l) = lambda_hint {
            if (l - lambda).abs() > 1e-12 * lambda {
                return domain(format!("λ hint {l} disagrees with the kernel decay {lambda}"));
            }
        }
        let mut acc = 0.0;
        for a in &atoms {
            for b in &atoms {
                acc += a.weight * b.weight * (-lambda * (a.right_end - b.right_end).abs()).exp();
            }
        }
        return Ok(acc / (2.0 * lambda));
    }
    domain("limit variance needs f supported in [0, ∞) or a stationary OU combination")
}

/// Relative mass of a stationary atom that may fall below the grid.
const TRUNCATION_TOL: f64 = 1e-8;

/// Uniform grid covering the support of `f` (stationary atoms truncated
/// at relative mass 1e-10).
pub fn trace_grid(f: &KernelSpec, cells: usize) -> Result<GridSpec> {
    match f.support(1e-10) {
        Some((lo, hi)) => GridSpec::uniform(lo, hi, cells),
        None => GridSpec::uniform(0.0, 1.0, cells),
    }
}

fn check_coverage(f: &KernelSpec, grid: &GridSpec) -> Result<()> {
    for a in &f.atoms {
        if a.weight == 0.0 {
            continue;
        }
        if a.right_end > grid.upper {
            return domain(format!("support reaches {} beyond the grid end {}", a.right_end, grid.upper));
        }
        if a.is_stationary() {
            let tail = (-a.decay * (a.right_end - grid.lower)).exp();
            if tail > TRUNCATION_TOL {
                return accuracy(format!(
                    "grid lower end {} leaves relative tail mass {tail:e} of a stationary atom",
                    grid.lower
                ));
            }
        } else if a.left_end < grid.lower {
            return domain(format!("support starts at {} below the grid start {}", a.left_end, grid.lower));
        }
    }
    Ok(())
}

struct TraceLevel {
    k2: f64,
    k3: f64,
    k4: f64,
}

fn trace_level(f: &KernelSpec, hv: f64, grid: &GridSpec, want_high: bool) -> TraceLevel {
    let edges = grid.edges_with_breakpoints(&f.breakpoints());
    let a = cell_integrals(f, &edges);
    let m2 = riesz_average_matrix(&edges, 2.0 * hv - 2.0);
    let k2 = c1m(hv, 2) * a.dot(&(&m2 * &a));
    if !want_high {
        return TraceLevel { k2, k3: 0.0, k4: 0.0 };
    }
    let mut p = riesz_average_matrix(&edges, hv - 1.0);
    for (j, aj) in a.iter().enumerate() {
        p.column_mut(j).scale_mut(*aj);
    }
    let p2 = &p * &p;
    let n = p.nrows();
    let (mut t3, mut t4) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            t3 += p2[(i, j)] * p[(j, i)];
            t4 += p2[(i, j)] * p2[(j, i)];
        }
    }
    TraceLevel { k2, k3: c1m(hv, 3) * t3, k4: c1m(hv, 4) * t4 }
}

/// Error estimate from three nested levels (coarse to fine).
fn richardson_error(coarse: f64, mid: f64, fine: f64) -> f64 {
    let d1 = fine - mid;
    let d2 = mid - coarse;
    let r = if d2 != 0.0 && d1 * d2 > 0.0 { (d1 / d2).clamp(0.1, 0.9) } else { 0.9 };
    1.5 * d1.abs() * r / (1.0 - r) + 1e-13 * fine.abs()
}

/// Trace-backend cumulants k_1..k_4 of ∫ f dZ^H on the given grid.
///
/// k₂ uses the exact cell-pair average of |u-v|^{2H-2}; k₃ and k₄ use the
/// trace of the m-th power of the transfer matrix built from cell averages
/// of |u-v|^{H-1}. Errors come from the same computation with 1/2 and 1/4
/// of the cells.
pub fn cumulants_wr_trace(f: &KernelSpec, h: HurstIndex, grid: &GridSpec) -> Result<CumulantVector> {
    cumulants_wr_trace_orders(f, h, grid, true)
}

fn cumulants_wr_trace_orders(f: &KernelSpec, h: HurstIndex, grid: &GridSpec, high: bool) -> Result<CumulantVector> {
    let hv = h.require_process()?;
    check_coverage(f, grid)?;
    let mut out = CumulantVector::default();
    out.insert(1, 0.0, 0.0);
    if f.is_zero() {
        for m in 2..=4 {
            out.insert(m, 0.0, 0.0);
        }
        return Ok(out);
    }
    let level = |div: usize| -> Result<TraceLevel> {
        let g = GridSpec { cells: (grid.cells / div).max(2), ..*grid };
        Ok(trace_level(f, hv, &g, high))
    };
    let fine = level(1)?;
    let mid = level(2)?;
    let coarse = level(4)?;
    out.insert(2, fine.k2, richardson_error(coarse.k2, mid.k2, fine.k2));
    if high {
        out.insert(3, fine.k3, richardson_error(coarse.k3, mid.k3, fine.k3));
        out.insert(4, fine.k4, richardson_error(coarse.k4, mid.k4, fine.k4));
    }
    Ok(out)
}

/// Single-order trace-backend cumulant, m ∈ {2, 3, 4}.
pub fn cumulant_wr_trace(f: &KernelSpec, h: HurstIndex, m: usize, grid: &GridSpec) -> Result<Estimate> {
    if !(2..=4).contains(&m) {
        return domain(format!("trace backend supports orders 2..=4, got {m}"));
    }
    let cv = cumulants_wr_trace_orders(f, h, grid, m > 2)?;
    Ok(Estimate { value: cv.get(m).unwrap(), error: cv.error(m).unwrap() })
}

fn support_pieces(f: &KernelSpec) -> Vec<(f64, f64)> {
    let b = f.breakpoints();
    b.windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|&(a, c)| f.atoms.iter().any(|x| x.weight != 0.0 && x.left_end <= a && x.right_end >= c))
        .collect()
}

/// h(u1, u3) = ∫ f(u2) |u1-u2|^p |u2-u3|^p du2 with cuts at the singular points.
fn middle_factor(f: &KernelSpec, pieces: &[(f64, f64)], u1: f64, u3: f64, p: f64, res: Resolution) -> f64 {
    let mut acc = 0.0;
    for &(a, b) in pieces {
        let mut cuts = vec![a, b];
        for s in [u1, u3] {
            if s > a && s < b {
                cuts.push(s);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            // offsets from the nearer end keep the singular distances exact
            for (end, sign) in [(lo, 1.0), (hi, -1.0)] {
                let (d1, d3) = (sign * (end - u1), sign * (end - u3));
                let hits = (d1 == 0.0) as i32 + (d3 == 0.0) as i32;
                let g = |x: f64| f.eval(end + sign * x) * (x + d1).abs().powf(p) * (x + d3).abs().powf(p);
                acc += integrate_from(g, (mid - lo).abs(), p * hits as f64, res);
            }
        }
    }
    acc
}

fn quadrature_at(f: &KernelSpec, hv: f64, m: usize, outer: Resolution, inner: Resolution) -> f64 {
    let pieces = support_pieces(f);
    let mut acc = 0.0;
    for (i, &pi) in pieces.iter().enumerate() {
        for &pj in &pieces[i..] {
            let v = if m == 2 {
                let g = |u: f64, v: f64| f.eval(u) * f.eval(v);
                pair_integral(&g, pi, pj, 2.0 * hv - 2.0, outer)
            } else {
                let p = hv - 1.0;
                let g = |u: f64, v: f64| f.eval(u) * f.eval(v) * middle_factor(f, &pieces, u, v, p, inner);
                pair_integral(&g, pi, pj, p, outer)
            };
            acc += if pi == pj { v } else { 2.0 * v };
        }
    }
    c1m(hv, m) * acc
}

/// Direct quadrature of the cyclic integral for m ∈ {2, 3}; compactly
/// supported f only. The error estimate is the difference between two
/// resolutions.
pub fn cumulant_wr_quadrature(f: &KernelSpec, h: HurstIndex, m: usize) -> Result<Estimate> {
    let hv = h.require_process()?;
    if !(2..=3).contains(&m) {
        return domain(format!("quadrature backend supports orders 2 and 3, got {m}"));
    }
    if f.has_infinite_support() {
        return domain("quadrature backend needs compact support; use the trace backend");
    }
    if f.is_zero() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (coarse, fine) = if m == 2 {
        (
            quadrature_at(f, hv, 2, Resolution::COARSE, Resolution::COARSE),
            quadrature_at(f, hv, 2, Resolution::FINE, Resolution::FINE),
        )
    } else {
        (
            quadrature_at(f, hv, 3, Resolution { order: 8, levels: 12 }, Resolution { order: 8, levels: 12 }),
            quadrature_at(f, hv, 3, Resolution { order: 14, levels: 20 }, Resolution { order: 14, levels: 18 }),
        )
    };
    Ok(Estimate { value: fine, error: (fine - coarse).abs() + 1e-13 * fine.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn h(x: f64) -> HurstIndex {
        HurstIndex::new(x).unwrap()
    }

    #[test]
    fn quadratic_form_on_diagonal_and_scalar() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -1.0, 2.0]));
        for m in 2..=4usize {
            let want = 2f64.powi(m as i32 - 1)
                * factorial(m - 1)
                * [0.5f64, -1.0, 2.0].iter().map(|x| x.powi(m as i32)).sum::<f64>();
            assert!((cumulant_quadratic_form(&a, m).unwrap() - want).abs() < 1e-12);
        }
        let s = DMatrix::from_element(1, 1, 1.0 / 2f64.sqrt());
        assert!((cumulant_quadratic_form(&s, 2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cumulant_quadratic_form(&s, 1).unwrap(), 0.0);
        let ns = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(cumulant_quadratic_form(&ns, 2).is_err());
    }

    #[test]
    fn chi2_targets() {
        let one = KernelSpec::indicator(1.0).unwrap();
        let want = [0.0, 1.0, 2.0 * 2f64.sqrt(), 12.0];
        for m in 1..=4 {
            assert!((chi2_limit_cumulants(&one, m) - want[m - 1]).abs() < 1e-14);
        }
        assert_eq!(chi2_limit_cumulants(&KernelSpec::zero(), 3), 0.0);
    }

    #[test]
    fn integral_i_at_zero_lag() {
        for (hv, lam) in [(0.75, 1.0), (0.6, 2.0), (0.51, 0.5), (0.95, 1.3)] {
            let got = integral_i(0.0, h(hv), lam).unwrap();
            let want = hv * gamma(2.0 * hv) / lam.powf(2.0 * hv);
            assert!((got - want).abs() < 1e-11 * want, "H={hv}: {got} vs {want}");
        }
        assert!(integral_i(-1.0, h(0.7), 1.0).is_err());
    }

    #[test]
    fn integral_i_first_part_limit() {
        let (i1, _) = integral_i_parts(0.7, h(0.5 + 1e-9), 2.0).unwrap();
        assert!((i1 - (-1.4f64).exp() / 8.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_limit_variance_cases() {
        let t = 1.7;
        assert!((gaussian_limit_variance(&KernelSpec::indicator(t).unwrap(), None).unwrap() - t).abs() < 1e-15);
        let lam: f64 = 0.9;
        let ou = KernelSpec::rou_combination(&[1.0], &[t], lam, 1.0).unwrap();
        let want = (1.0 - (-2.0 * lam * t).exp()) / (2.0 * lam);
        assert!((gaussian_limit_variance(&ou, None).unwrap() - want).abs() < 1e-14);
        let st = KernelSpec::stationary_rou_combination(&[1.0], &[t], lam, 2.0).unwrap();
        assert!((gaussian_limit_variance(&st, Some(lam)).unwrap() - 4.0 / (2.0 * lam)).abs() < 1e-14);
        assert!(gaussian_limit_variance(&st, Some(2.0)).is_err());
        assert!(gaussian_limit_variance(&ou.plus(&st), None).is_err());
    }

    #[test]
    fn trace_backend_normalisation() {
        let one = KernelSpec::indicator(1.0).unwrap();
        let grid = trace_grid(&one, 64).unwrap();
        for hv in [0.55, 0.8] {
            let e = cumulant_wr_trace(&one, h(hv), 2, &grid).unwrap();
            assert!((e.value - 1.0).abs() < 1e-10, "{e:?}");
        }
        assert!(cumulant_wr_trace(&one, h(0.7), 5, &grid).is_err());
        let z = cumulants_wr_trace(&KernelSpec::zero(), h(0.7), &grid).unwrap();
        assert!(z.entries.values().all(|&v| v == 0.0));
    }

    #[test]
    fn trace_backend_rejects_short_grids() {
        let st = KernelSpec::stationary_rou_combination(&[1.0], &[1.0], 1.0, 1.0).unwrap();
        let grid = GridSpec::uniform(-3.0, 1.0, 32).unwrap();
        assert!(matches!(cumulants_wr_trace(&st, h(0.7), &grid), Err(crate::Error::Accuracy(_))));
        let one = KernelSpec::indicator(2.0).unwrap();
        let grid = GridSpec::uniform(0.0, 1.0, 32).unwrap();
        assert!(cumulants_wr_trace(&one, h(0.7), &grid).is_err());
    }

    #[test]
    fn quadrature_second_order() {
        let one = KernelSpec::indicator(1.0).unwrap();
        let e = cumulant_wr_quadrature(&one, h(0.7), 2).unwrap();
        assert!((e.value - 1.0).abs() < 1e-10);
        let two = one.scaled(2.0);
        let e = cumulant_wr_quadrature(&two, h(0.7), 2).unwrap();
        assert!((e.value - 4.0).abs() < 1e-9);
        let st = KernelSpec::stationary_rou_combination(&[1.0], &[1.0], 1.0, 1.0).unwrap();
        assert!(cumulant_wr_quadrature(&st, h(0.7), 2).is_err());
    }
}
