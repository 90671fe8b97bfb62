//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// I₁ = H(2H-1) ∫_0^∞ dv e^{-λv} ∫_{v+K}^∞ du e^{-λu} (u-v-K)^{2H-2} by
/// nested adaptive quadrature. The inner variable w = u - v - K is mapped
/// through w = x^{1/(2H-1)}, which removes the endpoint singularity.
pub fn i1_by_quadrature(h: f64, lambda: f64, k: f64) -> f64 {
    let q = 2.0 * h - 1.0;
    let x_max = (60.0 / lambda).powf(q);
    let inner = |v: f64| {
        let g = |x: f64| (-lambda * (x.powf(1.0 / q) + v + k)).exp() / q;
        adaptive_simpson(&g, 0.0, x_max, 1e-14)
    };
    let outer = |v: f64| (-lambda * v).exp() * inner(v);
    h * (2.0 * h - 1.0) * adaptive_simpson(&outer, 0.0, 40.0 / lambda, 1e-13)
}

/// c(H,2) from Γ through the Lanczos-free Stirling series with shift, used
/// to cross-check the library constant.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < 20.0 {
        shift -= z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2)
        + 1.0 / (1260.0 * z2 * z2 * z)
        - 1.0 / (1680.0 * z2 * z2 * z2 * z)
}

pub fn beta_stirling(p: f64, q: f64) -> f64 {
    (ln_gamma_stirling(p) + ln_gamma_stirling(q) - ln_gamma_stirling(p + q)).exp()
}

/// Rank of an integer matrix by fraction-free Bareiss elimination in i128.
pub fn bareiss_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let nrows = m.len();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..ncols {
        let Some(p) = (rank..nrows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                m[r][c] = (m[rank][col] * m[r][c] - m[r][col] * m[rank][c]) / prev;
            }
            m[r][col] = 0;
        }
        prev = m[rank][col];
        rank += 1;
    }
    rank
}

/// Two-sided Kolmogorov-Smirnov statistic, written out independently.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).max((i as f64 + 1.0) / n - c)
        })
        .fold(0.0, f64::max)
}

/// I₂ = H(2H-1) ∫_0^∞ dv e^{-λv} ∫_0^{v+K} du e^{-λu} (v+K-u)^{2H-2}, with
/// w = v + K - u mapped through w = x^{1/(2H-1)}.
pub fn i2_by_quadrature(h: f64, lambda: f64, k: f64) -> f64 {
    let q = 2.0 * h - 1.0;
    let inner = |v: f64| {
        let top = (v + k).powf(q);
        let g = |x: f64| (-lambda * (v + k - x.powf(1.0 / q))).exp() / q;
        adaptive_simpson(&g, 0.0, top, 1e-13)
    };
    let outer = |v: f64| (-lambda * v).exp() * inner(v);
    h * (2.0 * h - 1.0) * adaptive_simpson(&outer, 0.0, 40.0 / lambda, 1e-12)
}
