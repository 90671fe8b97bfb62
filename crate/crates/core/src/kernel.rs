//! Deterministic kernels: the Hurst index, exponential-indicator integrands,
//! the Rosenblatt kernel L and its generalisation J, and the inner product of
//! the space H_H.

use serde::{Deserialize, Serialize};

use crate::cumulant::integral_i;
use crate::error::{domain, Error, Result};
use crate::quad::{gauss, integrate_from, pair_integral, GridSpec, Resolution};
use crate::special::beta;

/// Self-similarity index.
///
/// `new` accepts the open interval (1/2, 1) used by every process-level
/// operation. `relaxed` accepts (1/4, 1] and is only honoured by finiteness
/// checks such as [`hh_norm_abs`] and the power-counting module.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.5 && h < 1.0 {
            Ok(Self(h))
        } else {
            domain(format!("Hurst index must lie in (1/2, 1), got {h}"))
        }
    }

    pub fn relaxed(h: f64) -> Result<Self> {
        if h > 0.25 && h <= 1.0 {
            Ok(Self(h))
        } else {
            domain(format!("relaxed Hurst index must lie in (1/4, 1], got {h}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_process_level(self) -> bool {
        self.0 > 0.5 && self.0 < 1.0
    }

    pub(crate) fn require_process(self) -> Result<f64> {
        if self.is_process_level() {
            Ok(self.0)
        } else {
            domain(format!("Hurst index must lie in (1/2, 1), got {}", self.0))
        }
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

/// u ↦ weight · e^{-decay (right_end - u)} · 1_{(left_end, right_end]}(u).
///
/// `left_end` may be `f64::NEG_INFINITY`; then `decay` must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AtomRepr", into = "AtomRepr")]
pub struct ExpIndicatorAtom {
    pub weight: f64,
    pub decay: f64,
    pub right_end: f64,
    pub left_end: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomRepr {
    #[serde(default = "one")]
    weight: f64,
    #[serde(default)]
    decay: f64,
    /// omitted means -∞
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<f64>,
    right: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<AtomRepr> for ExpIndicatorAtom {
    type Error = Error;
    fn try_from(r: AtomRepr) -> Result<Self> {
        Self::new(r.weight, r.decay, r.left.unwrap_or(f64::NEG_INFINITY), r.right)
    }
}

impl From<ExpIndicatorAtom> for AtomRepr {
    fn from(a: ExpIndicatorAtom) -> Self {
        AtomRepr {
            weight: a.weight,
            decay: a.decay,
            left: a.left_end.is_finite().then_some(a.left_end),
            right: a.right_end,
        }
    }
}

impl ExpIndicatorAtom {
    pub fn new(weight: f64, decay: f64, left_end: f64, right_end: f64) -> Result<Self> {
        if !weight.is_finite() || !right_end.is_finite() {
            return domain("atom weight and right end must be finite");
        }
        if !(decay >= 0.0) || !decay.is_finite() {
            return domain(format!("atom decay must be finite and nonnegative, got {decay}"));
        }
        if left_end.is_nan() || left_end == f64::INFINITY || left_end >= right_end {
            return domain(format!("atom needs left_end < right_end, got ({left_end}, {right_end}]"));
        }
        if left_end == f64::NEG_INFINITY && decay <= 0.0 {
            return domain("an atom reaching -∞ needs positive decay");
        }
        Ok(Self { weight, decay, right_end, left_end })
    }

    pub fn indicator(left: f64, right: f64) -> Result<Self> {
        Self::new(1.0, 0.0, left, right)
    }

    pub fn is_stationary(&self) -> bool {
        self.left_end == f64::NEG_INFINITY
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u > self.left_end && u <= self.right_end {
            self.weight * (-self.decay * (self.right_end - u)).exp()
        } else {
            0.0
        }
    }

    /// Value without the indicator; used on intervals already known to lie
    /// inside the support.
    fn shape(&self, u: f64) -> f64 {
        self.weight * (-self.decay * (self.right_end - u)).exp()
    }

    /// ∫ over (a, b] ∩ support.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(self.left_end);
        let hi = b.min(self.right_end);
        if hi <= lo {
            return 0.0;
        }
        let scale = self.weight * (-self.decay * (self.right_end - hi)).exp();
        if lo == f64::NEG_INFINITY {
            return scale / self.decay;
        }
        let len = hi - lo;
        if self.decay == 0.0 {
            scale * len
        } else {
            scale * (-(-self.decay * len).exp_m1()) / self.decay
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral_over(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Left end after truncating a stationary atom where its remaining mass
    /// falls below `rel` of its total.
    fn truncated_left(&self, rel: f64) -> f64 {
        if self.is_stationary() {
            self.right_end - (1.0 / rel).ln() / self.decay
        } else {
            self.left_end
        }
    }

    fn sort_key(&self) -> [f64; 4] {
        [self.left_end, self.right_end, self.decay, self.weight]
    }
}

/// Finite sum of exponential-indicator atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub atoms: Vec<ExpIndicatorAtom>,
}

impl KernelSpec {
    pub fn new(atoms: Vec<ExpIndicatorAtom>) -> Self {
        Self { atoms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// 1_{[0, t]} (the zero kernel when t = 0).
    pub fn indicator(t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return domain(format!("indicator horizon must be nonnegative, got {t}"));
        }
        if t == 0.0 {
            return Ok(Self::zero());
        }
        Ok(Self::new(vec![ExpIndicatorAtom::indicator(0.0, t)?]))
    }

    /// Σ_j α_j σ e^{-λ(t_j - u)} 1_{[0, t_j]}: the integrand of
    /// Σ_j α_j (Y(t_j) - e^{-λ t_j} ξ) for the ROU started at time 0.
    pub fn rou_combination(alphas: &[f64], times: &[f64], lambda: f64, sigma: f64) -> Result<Self> {
        Self::combination(alphas, times, lambda, sigma, false)
    }

    /// Σ_j α_j σ e^{-λ(t_j - u)} 1_{(-∞, t_j]}: the stationary ROU analogue.
    pub fn stationary_rou_combination(alphas: &[f64], times: &[f64], lambda: f64, sigma: f64) -> Result<Self> {
        Self::combination(alphas, times, lambda, sigma, true)
    }

    fn combination(alphas: &[f64], times: &[f64], lambda: f64, sigma: f64, stationary: bool) -> Result<Self> {
        if alphas.len() != times.len() {
            return domain("coefficient and time lists differ in length");
        }
        if !(lambda > 0.0 && sigma > 0.0) {
            return domain(format!("λ and σ must be positive, got λ={lambda}, σ={sigma}"));
        }
        let mut atoms = Vec::new();
        for (&a, &t) in alphas.iter().zip(times) {
            if a == 0.0 {
                continue;
            }
            let left = if stationary {
                f64::NEG_INFINITY
            } else {
                if !(t >= 0.0) {
                    return domain(format!("times must be nonnegative, got {t}"));
                }
                if t == 0.0 {
                    continue;
                }
                0.0
            };
            atoms.push(ExpIndicatorAtom::new(a * sigma, lambda, left, t)?);
        }
        Ok(Self::new(atoms))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::new(self.atoms.iter().map(|x| ExpIndicatorAtom { weight: a * x.weight, ..*x }).collect())
    }

    pub fn plus(&self, other: &KernelSpec) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Self::new(atoms)
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.weight == 0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.atoms.iter().map(|a| a.eval(u)).sum()
    }

    pub fn has_infinite_support(&self) -> bool {
        self.atoms.iter().any(|a| a.is_stationary())
    }

    /// Finite atom ends, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .atoms
            .iter()
            .flat_map(|a| [a.left_end, a.right_end])
            .filter(|x| x.is_finite())
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Smallest and largest point of the support, the lower one after
    /// truncating stationary atoms at relative mass `rel`.
    pub fn support(&self, rel: f64) -> Option<(f64, f64)> {
        if self.atoms.is_empty() {
            return None;
        }
        let lo = self.atoms.iter().map(|a| a.truncated_left(rel)).fold(f64::INFINITY, f64::min);
        let hi = self.atoms.iter().map(|a| a.right_end).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }

    /// ∫ f over (a, b].
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        self.atoms.iter().map(|x| x.integral_over(a, b)).sum()
    }
}

/// ∫_R f(u) du in closed form.
pub fn integral_of_f(f: &KernelSpec) -> f64 {
    f.atoms.iter().map(ExpIndicatorAtom::integral).sum()
}

/// c(H, 2) = sqrt(H(2H-1) / (2 β(H/2, 1-H)²)).
pub fn scaling_constant(h: HurstIndex) -> Result<f64> {
    let h = h.require_process()?;
    let b = beta(h / 2.0, 1.0 - h);
    Ok((h * (2.0 * h - 1.0) / (2.0 * b * b)).sqrt())
}

/// Relative tail tolerance used when truncating stationary atoms.
const TAIL_TOL: f64 = 1e-13;

/// ∫_lo^hi w(u)(u-y1)^e(u-y2)^e du with lo ≥ max(y1, y2), split at the
/// grid edges and refined geometrically toward the singular point.
fn kernel_segment<W: Fn(f64) -> f64>(
    e: f64,
    y1: f64,
    y2: f64,
    lo: f64,
    hi: f64,
    w: &W,
    edges: &[f64],
) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let y_hi = y1.max(y2);
    let y_lo = y1.min(y2);
    // work in x = u - lo so that distances to the singular points are exact
    let (g_hi, g_lo) = (lo - y_hi, lo - y_lo);
    let integrand = |x: f64| w(lo + x) * (x + g_hi).powf(e) * (x + g_lo).powf(e);
    let res = Resolution::FINE;
    // distance from lo to the nearest singular point other than lo itself
    let (exp_at_lo, near) = if g_hi == 0.0 {
        if y1 == y2 {
            (2.0 * e, f64::INFINITY)
        } else {
            (e, g_lo)
        }
    } else {
        (0.0, g_hi)
    };
    let mut cuts: Vec<f64> = edges.iter().map(|&x| x - lo).filter(|&x| x > 0.0 && x < hi - lo).collect();
    cuts.insert(0, 0.0);
    cuts.push(hi - lo);
    let mut acc = 0.0;
    for (k, win) in cuts.windows(2).enumerate() {
        let (a, b) = (win[0], win[1]);
        let width = b - a;
        let dist = if k == 0 { near } else { a + g_hi };
        let extra = if dist.is_finite() && dist > 0.0 {
            ((width / dist).log2().ceil().max(0.0) as usize) + 4
        } else {
            0
        };
        let shifted = |x: f64| integrand(a + x);
        if k == 0 {
            let levels = res.levels.max(extra).min(60);
            acc += integrate_from(shifted, width, exp_at_lo, Resolution { levels, ..res });
        } else if width > dist {
            acc += integrate_from(shifted, width, 0.0, Resolution { levels: extra.min(60), ..res });
        } else {
            acc += gauss(integrand, a, b, res.order);
        }
    }
    acc
}

/// L^H_t(y1, y2) = c(H,2) ∫_0^t (u-y1)_+^{H/2-1} (u-y2)_+^{H/2-1} du.
///
/// Returns +∞ when y1 = y2 ∈ [0, t), where the integral diverges.
pub fn rosenblatt_kernel_l(h: HurstIndex, t: f64, y1: f64, y2: f64, grid: &GridSpec) -> Result<f64> {
    let hv = h.require_process()?;
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("time must be finite and nonnegative, got {t}"));
    }
    if !(y1.is_finite() && y2.is_finite()) {
        return domain("kernel arguments must be finite");
    }
    let lo = y1.max(y2).max(0.0);
    if lo >= t {
        return Ok(0.0);
    }
    let e = hv / 2.0 - 1.0;
    if y1 == y2 && lo == y1 {
        return Ok(f64::INFINITY);
    }
    let c = scaling_constant(h)?;
    Ok(c * kernel_segment(e, y1, y2, lo, t, &|_| 1.0, &grid.edges()))
}

/// J_H f(y1, y2) = c(H,2) ∫ f(u)(u-y1)_+^{H/2-1}(u-y2)_+^{H/2-1} du.
pub fn wiener_rosenblatt_kernel_j(
    f: &KernelSpec,
    h: HurstIndex,
    y1: f64,
    y2: f64,
    grid: &GridSpec,
) -> Result<f64> {
    let hv = h.require_process()?;
    if !(y1.is_finite() && y2.is_finite()) {
        return domain("kernel arguments must be finite");
    }
    let e = hv / 2.0 - 1.0;
    let c = scaling_constant(h)?;
    let y_hi = y1.max(y2);
    let d = (y1 - y2).abs();
    let edges = grid.edges();
    let mut acc = 0.0;
    for atom in &f.atoms {
        if atom.weight == 0.0 || atom.right_end <= y_hi {
            continue;
        }
        let mut lo = atom.left_end.max(y_hi);
        if atom.is_stationary() {
            if d == 0.0 {
                return Ok(f64::INFINITY);
            }
            // ∫_{y_hi}^∞ (u-y_lo)^e (u-y_hi)^e du = β(e+1, -2e-1) d^{2e+1}
            let whole = beta(e + 1.0, -2.0 * e - 1.0) * d.powf(2.0 * e + 1.0);
            // skip the far left of [y_hi, t] where the exponential is negligible
            let need = ((atom.weight.abs() * whole) / TAIL_TOL).ln() / atom.decay;
            if need.is_finite() && atom.right_end - need > lo {
                lo = atom.right_end - need;
                let tail = atom.weight.abs() * (-atom.decay * (atom.right_end - lo)).exp() * whole;
                if !tail.is_finite() || tail > 1e-8 {
                    return Err(Error::Accuracy(format!("kernel truncation tail {tail:e} exceeds tolerance")));
                }
            }
        } else if lo == y_hi && y1 == y2 {
            return Ok(f64::INFINITY);
        }
        let shape = |u: f64| atom.shape(u);
        acc += kernel_segment(e, y1, y2, lo, atom.right_end, &shape, &edges);
    }
    Ok(c * acc)
}

/// Value and error estimate of a numerical quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn canonical_pair<'a>(a: &'a ExpIndicatorAtom, b: &'a ExpIndicatorAtom) -> (&'a ExpIndicatorAtom, &'a ExpIndicatorAtom) {
    let ka = a.sort_key();
    let kb = b.sort_key();
    let less = ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne());
    match less {
        Some(std::cmp::Ordering::Greater) => (b, a),
        _ => (a, b),
    }
}

fn atom_pair_inner(a: &ExpIndicatorAtom, b: &ExpIndicatorAtom, hv: f64, res: Resolution) -> Result<f64> {
    let (a, b) = canonical_pair(a, b);
    let h = HurstIndex(hv);
    if a.is_stationary() && b.is_stationary() && a.decay == b.decay {
        let k = (a.right_end - b.right_end).abs();
        return Ok(a.weight * b.weight * integral_i(k, h, a.decay)?);
    }
    let ia = (a.truncated_left(TAIL_TOL), a.right_end);
    let ib = (b.truncated_left(TAIL_TOL), b.right_end);
    let g = |u: f64, v: f64| a.shape(u) * b.shape(v);
    let val = hv * (2.0 * hv - 1.0) * pair_integral(&g, ia, ib, 2.0 * hv - 2.0, res);
    if !val.is_finite() {
        return Err(Error::Accuracy("divergent pairing in H_H inner product".into()));
    }
    Ok(val)
}

fn hh_inner_at(f: &KernelSpec, g: &KernelSpec, hv: f64, res: Resolution) -> Result<f64> {
    let mut parts = Vec::with_capacity(f.atoms.len() * g.atoms.len());
    for a in &f.atoms {
        for b in &g.atoms {
            if a.weight == 0.0 || b.weight == 0.0 {
                continue;
            }
            parts.push(atom_pair_inner(a, b, hv, res)?);
        }
    }
    // summation order independent of argument order
    parts.sort_by(f64::total_cmp);
    Ok(parts.iter().sum())
}

/// ⟨f, g⟩_{H_H} = H(2H-1) ∬ f(u) g(v) |u-v|^{2H-2} du dv.
pub fn hh_inner(f: &KernelSpec, g: &KernelSpec, h: HurstIndex) -> Result<f64> {
    let hv = h.require_process()?;
    hh_inner_at(f, g, hv, Resolution::FINE)
}

/// [`hh_inner`] together with the difference to a coarser evaluation.
pub fn hh_inner_estimate(f: &KernelSpec, g: &KernelSpec, h: HurstIndex) -> Result<Estimate> {
    let hv = h.require_process()?;
    let fine = hh_inner_at(f, g, hv, Resolution::FINE)?;
    let coarse = hh_inner_at(f, g, hv, Resolution::COARSE)?;
    Ok(Estimate { value: fine, error: (fine - coarse).abs() + 1e-14 * fine.abs() })
}

/// ∬ |f(u)||f(v)| |u-v|^p du dv over a truncated support.
pub(crate) fn abs_pair_norm(f: &KernelSpec, p: f64, lower: f64, res: Resolution) -> f64 {
    let mut cuts: Vec<f64> = f.breakpoints().into_iter().filter(|&x| x > lower).collect();
    cuts.push(lower);
    for a in &f.atoms {
        cuts.push(a.right_end);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = |u: f64, v: f64| f.eval(u).abs() * f.eval(v).abs();
    let pieces: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let mut acc = 0.0;
    for (i, &pi) in pieces.iter().enumerate() {
        for &pj in &pieces[i..] {
            let v = pair_integral(&g, pi, pj, p, res);
            acc += if pi == pj { v } else { 2.0 * v };
        }
    }
    acc
}

/// ∬ |f(u) f(v)| |u-v|^{2H-2} du dv, or +∞ when it diverges.
///
/// Accepts the relaxed Hurst range; for H ≤ 1/2 the diagonal singularity is
/// not integrable and any nonzero f gives +∞.
pub fn hh_norm_abs(f: &KernelSpec, h: HurstIndex) -> f64 {
    let hv = h.value();
    if f.is_zero() {
        return 0.0;
    }
    let p = 2.0 * hv - 2.0;
    if p <= -1.0 {
        return f64::INFINITY;
    }
    let Some((lo, _)) = f.support(1e-6) else {
        return 0.0;
    };
    if !f.has_infinite_support() {
        return abs_pair_norm(f, p, lo, Resolution::FINE);
    }
    // stationary atoms: extend the truncation until the value settles
    let (_, hi) = f.support(1.0).unwrap();
    let mut span = hi - lo;
    let mut prev = abs_pair_norm(f, p, hi - span, Resolution::FINE);
    for _ in 0..10 {
        span *= 2.0;
        let next = abs_pair_norm(f, p, hi - span, Resolution::FINE);
        if (next - prev).abs() <= 1e-9 * next.abs() {
            return next;
        }
        prev = next;
    }
    f64::INFINITY
}
