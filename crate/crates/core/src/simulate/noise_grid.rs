//! y-domain discretisation of the double Wiener integral.
//!
//! The noise dB(y) is averaged over cells: uniform cells over a window
//! [s_lo, s_hi] that contains the support of the integrand, then cells
//! growing geometrically to the left of s_lo down to `truncation_lower`.
//! The kernel is projected onto cell indicators exactly in y,
//!
//!   G_ij = c ∫ f(u) F_i(u) F_j(u) du,   F_i(u) = ∫_{cell i} (u-y)_+^{H/2-1} dy,
//!
//! and A_ij = G_ij / sqrt(w_i w_j).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{accuracy, domain, Result};
use crate::kernel::{abs_pair_norm, hh_inner, scaling_constant, HurstIndex, KernelSpec};
use crate::cumulant::integral_i;
use crate::quad::{gauss_legendre, Resolution};
use crate::special::beta;

/// Upper bound on the number of geometric tail cells.
const MAX_TAIL_CELLS: usize = 4000;

const NODE_BLOCK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    /// cell midpoints
    pub points: Vec<f64>,
    /// cell widths
    pub weights: Vec<f64>,
    pub edges: Vec<f64>,
    pub truncation_lower: f64,
    /// bound on the variance lost below `truncation_lower`, relative to the
    /// variance of the reference integrand 1_{[s_lo, s_hi]}
    pub tail_bound: f64,
    pub tolerance: f64,
    pub window: (f64, f64),
    pub hurst: HurstIndex,
}

/// Operator input: a time t (meaning 1_{[0, t]}) or a general integrand.
#[derive(Debug, Clone)]
pub enum OperatorSource {
    Time(f64),
    Kernel(KernelSpec),
}

/// Relative bound on the variance lost by discarding y < s_lo - d:
/// 4c² d^{H-1}/(1-H) · β(H/2, 1-H) · ∬|f f||u-v|^{H-1} / ‖f‖²_{H_H}.
fn tail_variance(hv: f64, c: f64, d: f64, abs_norm: f64) -> f64 {
    4.0 * c * c * d.powf(hv - 1.0) / (1.0 - hv) * beta(hv / 2.0, 1.0 - hv) * abs_norm
}

impl NoiseGrid {
    /// Grid for integrands supported in [s_lo, s_hi] with `inner_cells`
    /// uniform cells there, truncated so that the relative tail variance of
    /// 1_{[s_lo, s_hi]} stays below `tolerance`.
    pub fn new(h: HurstIndex, s_lo: f64, s_hi: f64, inner_cells: usize, tolerance: f64) -> Result<Self> {
        let hv = h.require_process()?;
        if !(s_lo < s_hi) || !s_lo.is_finite() || !s_hi.is_finite() {
            return domain(format!("noise window needs s_lo < s_hi, got [{s_lo}, {s_hi}]"));
        }
        if inner_cells == 0 || !(tolerance > 0.0) {
            return domain("noise grid needs cells > 0 and a positive tolerance");
        }
        let c = scaling_constant(h)?;
        let len = s_hi - s_lo;
        // ∬_{[0,len]²}|u-v|^{H-1} = 2 len^{H+1}/(H(H+1)), variance len^{2H}
        let abs_norm = 2.0 * len.powf(hv + 1.0) / (hv * (hv + 1.0));
        let var = len.powf(2.0 * hv);
        let d = (tolerance * var / tail_variance(hv, c, 1.0, abs_norm)).powf(1.0 / (hv - 1.0));
        let width = len / inner_cells as f64;
        let mut ratio = 1.15f64;
        let needed = |r: f64| ((d / width) * (r - 1.0) + 1.0).ln() / r.ln();
        while needed(ratio) > MAX_TAIL_CELLS as f64 {
            ratio *= 1.1;
        }
        let mut left = vec![s_lo];
        let mut w = width;
        while s_lo - left.last().unwrap() < d {
            let next = left.last().unwrap() - w;
            left.push(next);
            w *= ratio;
        }
        left.reverse();
        let mut edges = left;
        for i in 1..=inner_cells {
            edges.push(if i == inner_cells { s_hi } else { s_lo + width * i as f64 });
        }
        let truncation_lower = edges[0];
        let tail_bound = tail_variance(hv, c, s_lo - truncation_lower, abs_norm) / var;
        let points = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        let weights = edges.windows(2).map(|e| e[1] - e[0]).collect();
        Ok(Self { points, weights, edges, truncation_lower, tail_bound, tolerance, window: (s_lo, s_hi), hurst: h })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Relative tail bound for a specific integrand, including the part of
    /// stationary atoms cut at the window start.
    pub fn tail_bound_for(&self, f: &KernelSpec) -> Result<f64> {
        let h = self.hurst;
        let hv = h.value();
        let var = hh_inner(f, f, h)?;
        if var == 0.0 {
            return Ok(0.0);
        }
        let (s_lo, _) = self.window;
        let res = Resolution { order: 10, levels: 12 };
        let abs_norm = abs_pair_norm(f, hv - 1.0, s_lo, res);
        let c = scaling_constant(h)?;
        let noise_tail = tail_variance(hv, c, s_lo - self.truncation_lower, abs_norm);
        // norm of the stationary pieces left of s_lo, by the triangle inequality
        let mut cut = 0.0;
        for a in f.atoms.iter().filter(|a| a.is_stationary()) {
            cut += a.weight.abs() * (-a.decay * (a.right_end - s_lo)).exp() * integral_i(0.0, h, a.decay)?.sqrt();
        }
        Ok(((noise_tail.sqrt() + cut).powi(2)) / var)
    }
}

/// Quadrature nodes on [a, b], geometrically refined toward `a`.
fn graded_nodes(a: f64, b: f64, levels: usize, order: usize, out: &mut Vec<(f64, f64)>) {
    let rule = gauss_legendre(order);
    let len = b - a;
    let mut lo = 0.0;
    let mut hi = len * 0.5f64.powi(levels as i32);
    loop {
        let half = 0.5 * (hi - lo);
        let mid = a + 0.5 * (hi + lo);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            out.push((mid + half * x, w * half));
        }
        if hi >= len {
            break;
        }
        lo = hi;
        hi = (2.0 * hi).min(len);
    }
}

/// Symmetric matrix A_ij = k(y_i, y_j)·sqrt(w_i w_j) in the cell-averaged
/// sense, for k = L^H_t or J_H f.
pub fn discretize_operator(source: &OperatorSource, h: HurstIndex, grid: &NoiseGrid) -> Result<DMatrix<f64>> {
    discretize_with_cuts(source, h, grid, &[])
}

/// As `discretize_operator`, with the u-panels also split at `extra_cuts`,
/// so that a family discretised with common cuts is exactly linear.
pub(crate) fn discretize_with_cuts(
    source: &OperatorSource,
    h: HurstIndex,
    grid: &NoiseGrid,
    extra_cuts: &[f64],
) -> Result<DMatrix<f64>> {
    let hv = h.require_process()?;
    if grid.hurst != h {
        return domain("noise grid was built for a different Hurst index");
    }
    let f = match source {
        OperatorSource::Time(t) => KernelSpec::indicator(*t)?,
        OperatorSource::Kernel(k) => k.clone(),
    };
    let n = grid.len();
    if f.is_zero() {
        return Ok(DMatrix::zeros(n, n));
    }
    let (s_lo, s_hi) = grid.window;
    for a in &f.atoms {
        if a.right_end > s_hi || (!a.is_stationary() && a.left_end < s_lo) {
            return domain("integrand support leaves the noise-grid window");
        }
    }
    let bound = grid.tail_bound_for(&f)?;
    if bound > grid.tolerance {
        return accuracy(format!("noise-grid tail bound {bound:e} exceeds tolerance {:e}", grid.tolerance));
    }
    let e1 = hv / 2.0;
    let c = scaling_constant(h)?;
    // u-panels: split at all cell edges and breakpoints inside the window
    let mut cuts: Vec<f64> = grid.edges.iter().copied().filter(|&x| x >= s_lo && x <= s_hi).collect();
    cuts.extend(f.breakpoints().into_iter().chain(extra_cuts.iter().copied()).filter(|&x| x > s_lo && x < s_hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::new();
    for w in cuts.windows(2) {
        graded_nodes(w[0], w[1], 4, 6, &mut nodes);
    }
    nodes.retain(|&(u, _)| f.eval(u) != 0.0);
    // G = F diag(c f w) Fᵀ with F already divided by sqrt(w_i), accumulated
    // over blocks of nodes
    let mut a = DMatrix::zeros(n, n);
    for chunk in nodes.chunks(NODE_BLOCK) {
        let mut fm = DMatrix::zeros(n, chunk.len());
        let mut diag = DVector::zeros(chunk.len());
        for (k, &(u, wq)) in chunk.iter().enumerate() {
            diag[k] = c * f.eval(u) * wq;
            for i in 0..n {
                let (al, be) = (grid.edges[i], grid.edges[i + 1]);
                if al >= u {
                    break;
                }
                let fi = ((u - al).powf(e1) - if be < u { (u - be).powf(e1) } else { 0.0 }) / e1;
                fm[(i, k)] = fi / grid.weights[i].sqrt();
            }
        }
        let mut right = fm.clone();
        for k in 0..chunk.len() {
            right.column_mut(k).scale_mut(diag[k]);
        }
        a.gemm(1.0, &fm, &right.transpose(), 1.0);
    }
    Ok((&a + a.transpose()) * 0.5)
}
