//! Quadrature building blocks for weakly singular integrands.
//!
//! Everything here integrates functions that are smooth except for power
//! singularities `|x - x0|^p` with `p > -1` at known points. The strategy is
//! always the same: geometric panels toward the singular point, a power
//! substitution on the innermost panel that cancels the leading singular
//! term, and fixed-order Gauss-Legendre everywhere else.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_CACHED_ORDER: usize = 128;

static RULES: [OnceLock<GaussRule>; MAX_CACHED_ORDER + 1] =
    [const { OnceLock::new() }; MAX_CACHED_ORDER + 1];

fn compute_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            deriv = nf * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / deriv;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * deriv * deriv);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

/// Cached Gauss-Legendre rule of order `n` (1 ≤ n ≤ 128).
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    assert!((1..=MAX_CACHED_ORDER).contains(&n), "unsupported Gauss order {n}");
    RULES[n].get_or_init(|| compute_rule(n))
}

/// Plain Gauss-Legendre on [a, b].
pub fn gauss<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, order: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Resolution of the panel rules: Gauss order per panel and number of
/// geometric refinement levels toward each singular point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub order: usize,
    pub levels: usize,
}

impl Resolution {
    pub const COARSE: Resolution = Resolution { order: 10, levels: 14 };
    pub const FINE: Resolution = Resolution { order: 16, levels: 24 };
}

/// ∫_0^width g(x) dx for g behaving like x^exponent near 0.
fn singular_panel<F: FnMut(f64) -> f64>(g: &mut F, width: f64, exponent: f64, order: usize) -> f64 {
    debug_assert!(exponent > -1.0);
    // x = width·t^k with k = 1/(exponent+1) turns x^exponent dx into a
    // constant multiple of dt
    let k = 1.0 / (exponent + 1.0);
    let rule = gauss_legendre(order);
    let mut acc = 0.0;
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        let t = 0.5 * (node + 1.0);
        let x = width * t.powf(k);
        let jac = width * k * t.powf(k - 1.0);
        acc += w * g(x) * jac;
    }
    0.5 * acc
}

/// ∫_0^len g(x) dx with a power singularity of the given exponent at x = 0.
///
/// The integrand receives the offset from the singular point, so it can
/// form distances to that point without cancellation. Panels are
/// [0, len·2^-levels], ..., [len/2, len]. Pass `exponent = 0` for a
/// near-singular but finite integrand; the substitution is then skipped.
pub fn integrate_from<F: FnMut(f64) -> f64>(mut g: F, len: f64, exponent: f64, res: Resolution) -> f64 {
    if !(len > 0.0) {
        return 0.0;
    }
    let first = len * 0.5f64.powi(res.levels as i32);
    let mut acc = if exponent != 0.0 {
        singular_panel(&mut g, first, exponent, res.order)
    } else {
        gauss(&mut g, 0.0, first, res.order)
    };
    let mut lo = first;
    while lo < len {
        let hi = (2.0 * lo).min(len);
        acc += gauss(&mut g, lo, hi, res.order);
        lo = hi;
    }
    acc
}

/// ∫_a^b f with a power singularity of the given exponent at `a`.
pub fn integrate_left_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    exponent: f64,
    res: Resolution,
) -> f64 {
    integrate_from(|x| f(a + x), b - a, exponent, res)
}

/// ∫_a^b f with a power singularity of the given exponent at `b`.
pub fn integrate_right_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    exponent: f64,
    res: Resolution,
) -> f64 {
    integrate_from(|x| f(b - x), b - a, exponent, res)
}

/// ∫_a^b f with singular exponents at both endpoints.
pub fn integrate_both_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    exp_a: f64,
    exp_b: f64,
    res: Resolution,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mid = 0.5 * (a + b);
    integrate_left_singular(&mut f, a, mid, exp_a, res)
        + integrate_right_singular(&mut f, mid, b, exp_b, res)
}

/// Which end(s) of a [`GridSpec`] the grading concentrates points toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradeToward {
    #[default]
    Lower,
    Upper,
    Both,
}

/// A one-dimensional cell layout: `cells` cells on [lower, upper], graded
/// with x = lower + (upper-lower)·s^q toward the designated end(s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub cells: usize,
    pub grading_exponent: f64,
    #[serde(default)]
    pub toward: GradeToward,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, cells: usize, grading_exponent: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return domain(format!("grid needs finite lower < upper, got [{lower}, {upper}]"));
        }
        if cells == 0 {
            return domain("grid needs at least one cell");
        }
        if !(grading_exponent >= 1.0) {
            return domain(format!("grading exponent must be >= 1, got {grading_exponent}"));
        }
        Ok(Self { lower, upper, cells, grading_exponent, toward: GradeToward::Lower })
    }

    pub fn uniform(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        Self::new(lower, upper, cells, 1.0)
    }

    pub fn graded_toward(mut self, toward: GradeToward) -> Self {
        self.toward = toward;
        self
    }

    pub fn span(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        self.lower <= a && b <= self.upper
    }

    /// Cell edges, strictly increasing, `cells + 1` of them, ending exactly
    /// at `lower` and `upper`.
    pub fn edges(&self) -> Vec<f64> {
        let n = self.cells;
        let q = self.grading_exponent;
        let map = |s: f64| -> f64 {
            match self.toward {
                GradeToward::Lower => s.powf(q),
                GradeToward::Upper => 1.0 - (1.0 - s).powf(q),
                GradeToward::Both => {
                    if s <= 0.5 {
                        0.5 * (2.0 * s).powf(q)
                    } else {
                        1.0 - 0.5 * (2.0 - 2.0 * s).powf(q)
                    }
                }
            }
        };
        let mut e: Vec<f64> = (0..=n)
            .map(|i| self.lower + self.span() * map(i as f64 / n as f64))
            .collect();
        e[0] = self.lower;
        e[n] = self.upper;
        e
    }

    /// Edges with every breakpoint in (lower, upper) present as an edge.
    /// The nearest existing interior edge is moved onto the breakpoint when
    /// that keeps the edges strictly increasing; otherwise the breakpoint is
    /// inserted.
    pub fn edges_with_breakpoints(&self, breakpoints: &[f64]) -> Vec<f64> {
        let mut e = self.edges();
        for &b in breakpoints {
            if !(b > self.lower && b < self.upper) {
                continue;
            }
            let pos = e.partition_point(|&x| x < b);
            if e[pos] == b {
                continue;
            }
            // candidates: e[pos-1] < b < e[pos]
            let (lo, hi) = (pos - 1, pos);
            let pick = if b - e[lo] <= e[hi] - b { lo } else { hi };
            let movable = pick != 0 && pick != e.len() - 1 && !breakpoints.contains(&e[pick]);
            let room = movable && e[pick - 1] < b && b < e[pick + 1];
            if room {
                e[pick] = b;
            } else {
                e.insert(pos, b);
            }
        }
        e
    }
}

/// ∫_I ∫_J G(u, v) |u - v|^p dv du for G smooth on the box I × J, p > -1.
///
/// The intervals are first cut at each other's endpoints so that every
/// sub-box is either on the diagonal, touches it at a corner, or is
/// separated from it.
pub fn pair_integral<G: Fn(f64, f64) -> f64>(
    g: &G,
    i: (f64, f64),
    j: (f64, f64),
    p: f64,
    res: Resolution,
) -> f64 {
    if i.1 <= i.0 || j.1 <= j.0 {
        return 0.0;
    }
    let mut cuts = vec![i.0, i.1, j.0, j.1];
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = |iv: (f64, f64)| -> Vec<(f64, f64)> {
        cuts.windows(2)
            .map(|w| (w[0], w[1]))
            .filter(|&(a, b)| a >= iv.0 && b <= iv.1)
            .collect()
    };
    let mut acc = 0.0;
    for ip in pieces(i) {
        for jp in pieces(j) {
            acc += sub_box(g, ip, jp, p, res);
        }
    }
    acc
}

fn sub_box<G: Fn(f64, f64) -> f64>(
    g: &G,
    i: (f64, f64),
    j: (f64, f64),
    p: f64,
    res: Resolution,
) -> f64 {
    if i == j {
        diagonal_box(g, i.0, i.1, p, res)
    } else if i.1 == j.0 {
        corner_box(g, i.0, i.1, j.1, p, res)
    } else if j.1 == i.0 {
        // mirror so that the u-interval is on the left
        let swapped = |u: f64, v: f64| g(v, u);
        corner_box(&swapped, j.0, j.1, i.1, p, res)
    } else {
        separated_box(g, i, j, p, res)
    }
}

/// Same interval on both axes: fold onto d = |u - v|.
fn diagonal_box<G: Fn(f64, f64) -> f64>(g: &G, a: f64, b: f64, p: f64, res: Resolution) -> f64 {
    let len = b - a;
    let inner_res = Resolution { order: res.order, levels: res.levels / 3 };
    let fold = |d: f64| -> f64 {
        if d >= len {
            return 0.0;
        }
        let s = integrate_both_singular(|x| g(x + d, x) + g(x, x + d), a, b - d, 0.0, 0.0, inner_res);
        d.powf(p) * s
    };
    integrate_left_singular(fold, 0.0, len, p, res)
}

/// u ∈ [a, c], v ∈ [c, b]: singular only at the corner (c, c).
fn corner_box<G: Fn(f64, f64) -> f64>(
    g: &G,
    a: f64,
    c: f64,
    b: f64,
    p: f64,
    res: Resolution,
) -> f64 {
    let (xl, yl) = (c - a, b - c);
    let d = xl.min(yl);
    let order = res.order;
    // Duffy split of [0, d]^2 in x = c - u, y = v - c
    let tri_upper = |y: f64| -> f64 {
        // x = y·s
        let inner = gauss(|s| g(c - y * s, c + y) * (1.0 + s).powf(p), 0.0, 1.0, order);
        y.powf(p + 1.0) * inner
    };
    let tri_lower = |x: f64| -> f64 {
        let inner = gauss(|s| g(c - x, c + x * s) * (1.0 + s).powf(p), 0.0, 1.0, order);
        x.powf(p + 1.0) * inner
    };
    let mut acc = integrate_left_singular(tri_upper, 0.0, d, p + 1.0, res)
        + integrate_left_singular(tri_lower, 0.0, d, p + 1.0, res);
    // strip beyond the square, away from the corner
    if xl > d {
        let mut lo = d;
        while lo < xl {
            let hi = (2.0 * lo).min(xl);
            acc += gauss(
                |x| gauss(|y| g(c - x, c + y) * (x + y).powf(p), 0.0, d, order),
                lo,
                hi,
                order,
            );
            lo = hi;
        }
    }
    if yl > d {
        let mut lo = d;
        while lo < yl {
            let hi = (2.0 * lo).min(yl);
            acc += gauss(
                |y| gauss(|x| g(c - x, c + y) * (x + y).powf(p), 0.0, d, order),
                lo,
                hi,
                order,
            );
            lo = hi;
        }
    }
    acc
}

/// Panels on [lo, hi] geometrically refined toward `near` (an endpoint),
/// starting at width `gap`.
fn geometric_panels(lo: f64, hi: f64, near_lo: bool, gap: f64) -> Vec<(f64, f64)> {
    let len = hi - lo;
    let mut out = Vec::new();
    let mut w = gap.min(len);
    let mut start = 0.0;
    while start < len {
        let end = (start + w).min(len);
        if near_lo {
            out.push((lo + start, lo + end));
        } else {
            out.push((hi - end, hi - start));
        }
        start = end;
        w *= 2.0;
    }
    out
}

fn separated_box<G: Fn(f64, f64) -> f64>(
    g: &G,
    i: (f64, f64),
    j: (f64, f64),
    p: f64,
    res: Resolution,
) -> f64 {
    let i_left = i.1 <= j.0;
    let gap = if i_left { j.0 - i.1 } else { i.0 - j.1 };
    let ip = geometric_panels(i.0, i.1, !i_left, gap);
    let jp = geometric_panels(j.0, j.1, i_left, gap);
    let order = res.order;
    let mut acc = 0.0;
    for &(a, b) in &ip {
        for &(c, d) in &jp {
            acc += gauss(|u| gauss(|v| g(u, v) * (u - v).abs().powf(p), c, d, order), a, b, order);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 10, 16, 40] {
            let rule = gauss_legendre(n);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13);
            // degree 2n-1 monomial
            let deg = 2 * n - 2;
            let got = gauss(|x| x.powi(deg as i32), 0.0, 1.0, n);
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn left_singular_power() {
        for p in [-0.98, -0.75, -0.5, -0.1, 0.3] {
            let got = integrate_left_singular(|x: f64| x.powf(p) * (1.0 + x).exp(), 0.0, 2.0, p, Resolution::FINE);
            // series ∫_0^2 x^p e^{1+x} dx = e Σ 2^{n+p+1}/(n!(n+p+1))
            let mut want = 0.0;
            let mut fact = 1.0;
            for n in 0..60 {
                if n > 0 {
                    fact *= n as f64;
                }
                want += 2f64.powf(n as f64 + p + 1.0) / (fact * (n as f64 + p + 1.0));
            }
            want *= 1f64.exp();
            assert!((got - want).abs() / want < 1e-11, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn right_and_both_singular() {
        let p = -0.6;
        // forming 1 - x from the absolute coordinate costs digits next to
        // the endpoint; the offset form does not
        let got = integrate_right_singular(|x: f64| (1.0 - x).powf(p), 0.0, 1.0, p, Resolution::FINE);
        assert!((got - 1.0 / (p + 1.0)).abs() < 1e-8, "{got}");
        let got = integrate_from(|x: f64| x.powf(p), 1.0, p, Resolution::FINE);
        assert!((got - 1.0 / (p + 1.0)).abs() < 1e-13, "{got}");
        // Beta(0.3, 0.4) = ∫ x^{-0.7}(1-x)^{-0.6}
        let got = integrate_from(|x: f64| x.powf(-0.7) * (1.0 - x).powf(-0.6), 0.5, -0.7, Resolution::FINE)
            + integrate_from(|x: f64| (1.0 - x).powf(-0.7) * x.powf(-0.6), 0.5, -0.6, Resolution::FINE);
        let want = crate::special::beta(0.3, 0.4);
        assert!((got - want).abs() / want < 1e-11, "{got} vs {want}");
    }

    #[test]
    fn grid_edges_graded_and_monotone() {
        let g = GridSpec::new(0.0, 2.0, 8, 3.0).unwrap();
        let e = g.edges();
        assert_eq!(e.len(), 9);
        assert_eq!(e[0], 0.0);
        assert_eq!(e[8], 2.0);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        assert!(e[1] - e[0] < e[8] - e[7]);
        let both = g.graded_toward(GradeToward::Both).edges();
        assert!((both[1] - both[0] - (both[8] - both[7])).abs() < 1e-14);
        let sum: f64 = e.windows(2).map(|w| w[1] - w[0]).sum();
        assert!((sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn breakpoints_become_edges() {
        let g = GridSpec::uniform(0.0, 1.0, 10).unwrap();
        let e = g.edges_with_breakpoints(&[0.5, 0.33, 0.999, 5.0]);
        for b in [0.5, 0.33, 0.999] {
            assert!(e.contains(&b), "{b} missing from {e:?}");
        }
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*e.first().unwrap(), 0.0);
        assert_eq!(*e.last().unwrap(), 1.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(GridSpec::new(1.0, 1.0, 4, 1.0).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0, 1.0).is_err());
        assert!(GridSpec::new(0.0, 1.0, 4, 0.5).is_err());
    }

    #[test]
    fn pair_integral_of_unit_square() {
        // ∫∫_{[0,1]^2} |u-v|^p = 2/((p+1)(p+2))
        for p in [-0.98, -0.8, -0.5, -0.2, 0.0] {
            let got = pair_integral(&|_, _| 1.0, (0.0, 1.0), (0.0, 1.0), p, Resolution::FINE);
            let want = 2.0 / ((p + 1.0) * (p + 2.0));
            assert!((got - want).abs() / want < 1e-11, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn pair_integral_adjacent_and_separated_boxes() {
        // F(x) = |x|^{p+2}/((p+1)(p+2)) gives the box integral in closed form
        let p: f64 = -0.6;
        let big_f = |x: f64| x.abs().powf(p + 2.0) / ((p + 1.0) * (p + 2.0));
        let exact = |a: f64, b: f64, c: f64, d: f64| big_f(b - c) - big_f(a - c) - big_f(b - d) + big_f(a - d);
        for (i, j) in [((0.0, 1.0), (1.0, 3.0)), ((2.0, 2.5), (0.0, 2.0)), ((0.0, 1.0), (1.1, 1.5)), ((0.0, 1.0), (0.5, 2.0))] {
            let got = pair_integral(&|_, _| 1.0, i, j, p, Resolution::FINE);
            let want = exact(i.0, i.1, j.0, j.1);
            assert!((got - want).abs() / want.abs() < 1e-10, "{i:?} {j:?}: {got} vs {want}");
        }
    }
}
