//! Power counting for integrals of products f_i(M_i(u)) over R^m.
//!
//! Spans and ranks are computed over the rationals on the linear parts of
//! the functionals; offsets never enter.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Largest functional count accepted; subsets are enumerated exhaustively.
pub const MAX_FUNCTIONALS: usize = 20;

/// A subset of a functional set, as a bitmask over its indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Subset(pub u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(n: usize) -> Self {
        Subset(if n == 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    pub fn from_indices(ix: &[usize]) -> Self {
        Subset(ix.iter().fold(0, |acc, &i| acc | (1 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        Subset(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        Subset(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|&i| self.contains(i)).collect()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ix: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", ix.join(","))
    }
}

/// A rational written as an integer or as "p/q" in configuration files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RationalRepr {
    Int(i64),
    Text(String),
}

fn parse_rational(r: RationalRepr) -> Result<BigRational> {
    match r {
        RationalRepr::Int(i) => Ok(BigRational::from_integer(BigInt::from(i))),
        RationalRepr::Text(s) => {
            let t = s.trim();
            BigRational::from_str(t).or_else(|_| match BigInt::from_str(t) {
                Ok(i) => Ok(BigRational::from_integer(i)),
                Err(_) => domain(format!("not a rational number: {s:?}")),
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalRepr {
    coefficients: Vec<RationalRepr>,
    #[serde(default = "zero_repr")]
    offset: RationalRepr,
}

fn zero_repr() -> RationalRepr {
    RationalRepr::Int(0)
}

/// u ↦ Σ c_k u_k + offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FunctionalRepr", into = "FunctionalRepr")]
pub struct AffineFunctional {
    pub coefficients: Vec<BigRational>,
    pub offset: BigRational,
}

impl TryFrom<FunctionalRepr> for AffineFunctional {
    type Error = crate::Error;
    fn try_from(r: FunctionalRepr) -> Result<Self> {
        let c = r.coefficients.into_iter().map(parse_rational).collect::<Result<Vec<_>>>()?;
        Self::new(c, parse_rational(r.offset)?)
    }
}

impl From<AffineFunctional> for FunctionalRepr {
    fn from(a: AffineFunctional) -> Self {
        FunctionalRepr {
            coefficients: a.coefficients.iter().map(|c| RationalRepr::Text(c.to_string())).collect(),
            offset: RationalRepr::Text(a.offset.to_string()),
        }
    }
}

impl AffineFunctional {
    pub fn new(coefficients: Vec<BigRational>, offset: BigRational) -> Result<Self> {
        if coefficients.iter().all(Zero::is_zero) {
            return domain("a functional needs a nonzero coefficient");
        }
        Ok(Self { coefficients, offset })
    }

    /// Linear functional with integer coefficients.
    pub fn linear(coefficients: &[i64]) -> Result<Self> {
        Self::new(
            coefficients.iter().map(|&c| BigRational::from_integer(BigInt::from(c))).collect(),
            BigRational::zero(),
        )
    }

    pub fn with_offset(mut self, offset: BigRational) -> Self {
        self.offset = offset;
        self
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }
}

/// Rank of a list of rational vectors by fraction-exact elimination.
pub fn rational_rank(rows: &[&[BigRational]]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.iter().map(|r| r.to_vec()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col].clone();
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let factor = &m[r][col] / &pivot;
                for c in col..cols {
                    let d = &factor * &m[rank][c];
                    m[r][c] -= d;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AffineFunctional>", into = "Vec<AffineFunctional>")]
pub struct FunctionalSet {
    functionals: Vec<AffineFunctional>,
    dimension: usize,
}

impl TryFrom<Vec<AffineFunctional>> for FunctionalSet {
    type Error = crate::Error;
    fn try_from(v: Vec<AffineFunctional>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FunctionalSet> for Vec<AffineFunctional> {
    fn from(s: FunctionalSet) -> Self {
        s.functionals
    }
}

impl FunctionalSet {
    pub fn new(functionals: Vec<AffineFunctional>) -> Result<Self> {
        let Some(first) = functionals.first() else {
            return domain("a functional set needs at least one functional");
        };
        let dimension = first.dimension();
        if functionals.iter().any(|f| f.dimension() != dimension) {
            return domain("all functionals must have the same dimension");
        }
        if functionals.len() > MAX_FUNCTIONALS {
            return domain(format!("at most {MAX_FUNCTIONALS} functionals are supported"));
        }
        Ok(Self { functionals, dimension })
    }

    /// {u_1 - u_2, u_2 - u_3, ..., u_m - u_1} on R^m.
    pub fn cyclic_differences(m: usize) -> Result<Self> {
        if m < 2 {
            return domain("a cyclic set needs m >= 2");
        }
        let fs = (0..m)
            .map(|i| {
                let mut c = vec![0i64; m];
                c[i] += 1;
                c[(i + 1) % m] -= 1;
                AffineFunctional::linear(&c)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(fs)
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn functionals(&self) -> &[AffineFunctional] {
        &self.functionals
    }

    pub fn full(&self) -> Subset {
        Subset::full(self.len())
    }

    /// r(W): number of linearly independent coefficient vectors in W.
    pub fn rank(&self, w: Subset) -> usize {
        let rows: Vec<&[BigRational]> = w.indices().iter().map(|&i| self.functionals[i].coefficients.as_slice()).collect();
        rational_rank(&rows)
    }

    fn check(&self, w: Subset) -> Result<()> {
        if !w.is_subset_of(self.full()) {
            return domain(format!("subset {w} is not contained in a set of {} functionals", self.len()));
        }
        Ok(())
    }
}

/// Ranks of every subset, computed once.
struct RankTable {
    ranks: Vec<u8>,
}

impl RankTable {
    fn new(t: &FunctionalSet) -> Self {
        let ranks = (0..1u32 << t.len()).map(|s| t.rank(Subset(s)) as u8).collect();
        Self { ranks }
    }

    fn rank(&self, w: Subset) -> usize {
        self.ranks[w.0 as usize] as usize
    }

    fn closure(&self, w: Subset, n: usize) -> Subset {
        let r = self.rank(w);
        (0..n).fold(w, |acc, i| if !w.contains(i) && self.rank(w.with(i)) == r { acc.with(i) } else { acc })
    }

    fn padded(&self, w: Subset, n: usize) -> bool {
        self.closure(w, n) == w && w.indices().iter().all(|&i| self.closure(w.without(i), n).contains(i))
    }
}

/// s_T(W) = span(W) ∩ T.
pub fn span_closure(w: Subset, t: &FunctionalSet) -> Result<Subset> {
    t.check(w)?;
    let r = t.rank(w);
    let mut out = w;
    for i in 0..t.len() {
        if !w.contains(i) && t.rank(w.with(i)) == r {
            out = out.with(i);
        }
    }
    Ok(out)
}

/// W is padded when it is span-closed and every member lies in the span
/// of the others.
pub fn is_padded(w: Subset, t: &FunctionalSet) -> Result<bool> {
    t.check(w)?;
    if span_closure(w, t)? != w {
        return Ok(false);
    }
    for i in w.indices() {
        if !span_closure(w.without(i), t)?.contains(i) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All padded subsets, the empty set included.
pub fn padded_subsets(t: &FunctionalSet) -> Vec<Subset> {
    let table = RankTable::new(t);
    let n = t.len();
    (0..1u32 << n).map(Subset).filter(|&w| table.padded(w, n)).collect()
}

/// Exponents near zero (α) and at infinity (β) of the bounds on |f_i|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentAssignment {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ExponentAssignment {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return domain("α and β lists differ in length");
        }
        if alpha.iter().chain(&beta).any(|x| !x.is_finite()) {
            return domain("exponents must be finite");
        }
        Ok(Self { alpha, beta })
    }

    pub fn uniform(n: usize, alpha: f64, beta: f64) -> Self {
        Self { alpha: vec![alpha; n], beta: vec![beta; n] }
    }

    /// All α_i > -1: the d₀ condition need only be checked on padded sets.
    pub fn alpha_gate(&self) -> bool {
        self.alpha.iter().all(|&a| a > -1.0)
    }

    /// All β_i ≥ -1: the same for d_∞.
    pub fn beta_gate(&self) -> bool {
        self.beta.iter().all(|&b| b >= -1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: Vec<usize>,
    pub rank: usize,
    pub closure: Vec<usize>,
    pub padded: bool,
    pub d0: f64,
    pub d_inf: f64,
    /// whether d₀ > 0 was required of this subset
    pub checks_d0: bool,
    /// whether d_∞ < 0 was required of this subset
    pub checks_d_inf: bool,
}

impl SubsetReport {
    pub fn passes(&self) -> bool {
        (!self.checks_d0 || self.d0 > 0.0) && (!self.checks_d_inf || self.d_inf < 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityVerdict {
    pub integrable: bool,
    pub padded_only_d0: bool,
    pub padded_only_d_inf: bool,
    pub reports: Vec<SubsetReport>,
}

/// d₀(W) = r(W) + Σ_{s_T(W)} α_i > 0 for nonempty span-closed W, and
/// d_∞(W) = r(T) - r(W) + Σ_{T∖s_T(W)} β_i < 0 for proper span-closed W,
/// the empty set included. Padded subsets suffice under the gates.
pub fn check_integrability(t: &FunctionalSet, e: &ExponentAssignment) -> Result<IntegrabilityVerdict> {
    let n = t.len();
    if e.alpha.len() != n || e.beta.len() != n {
        return domain(format!("{} functionals but {} α and {} β exponents", n, e.alpha.len(), e.beta.len()));
    }
    let table = RankTable::new(t);
    let full = t.full();
    let r_t = table.rank(full);
    let (pa, pb) = (e.alpha_gate(), e.beta_gate());
    let mut reports = Vec::new();
    for s in 0..1u32 << n {
        let w = Subset(s);
        if table.closure(w, n) != w {
            continue;
        }
        let padded = table.padded(w, n);
        let checks_d0 = !w.is_empty() && (padded || !pa);
        let checks_d_inf = w != full && (padded || !pb);
        if !checks_d0 && !checks_d_inf {
            continue;
        }
        let r = table.rank(w);
        let d0 = r as f64 + w.indices().iter().map(|&i| e.alpha[i]).sum::<f64>();
        let outside = Subset(full.0 & !w.0);
        let d_inf = (r_t - r) as f64 + outside.indices().iter().map(|&i| e.beta[i]).sum::<f64>();
        reports.push(SubsetReport {
            subset: w.indices(),
            rank: r,
            closure: w.indices(),
            padded,
            d0,
            d_inf,
            checks_d0,
            checks_d_inf,
        });
    }
    let integrable = reports.iter().all(SubsetReport::passes);
    Ok(IntegrabilityVerdict { integrable, padded_only_d0: pa, padded_only_d_inf: pb, reports })
}

/// Exponents α(s) = α₀ + s·α₁, β(s) = β₀ + s·β₁ along a scan parameter s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentFamily {
    pub alpha0: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
}

impl ExponentFamily {
    /// α_i = s - 1 with β fixed: the kernel |x|^{H-1} scanned in H.
    pub fn hurst_scan(n: usize, beta: f64) -> Self {
        Self { alpha0: vec![-1.0; n], alpha1: vec![1.0; n], beta0: vec![beta; n], beta1: vec![0.0; n] }
    }

    /// β_i = -s with α fixed: decay |x|^{-γ} scanned in γ.
    pub fn decay_scan(n: usize, alpha: f64) -> Self {
        Self { alpha0: vec![alpha; n], alpha1: vec![0.0; n], beta0: vec![0.0; n], beta1: vec![-1.0; n] }
    }

    pub fn at(&self, s: f64) -> Result<ExponentAssignment> {
        let n = self.alpha0.len();
        if self.alpha1.len() != n || self.beta0.len() != n || self.beta1.len() != n {
            return domain("exponent family lists differ in length");
        }
        let lin = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        ExponentAssignment::new(lin(&self.alpha0, &self.alpha1), lin(&self.beta0, &self.beta1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScanOutcome {
    /// The verdict flips at `value`; `integrable_above` tells on which side
    /// the integral is finite.
    Threshold { value: f64, integrable_above: bool },
    /// Same verdict at both ends of the range.
    Monotone { integrable: bool },
}

/// Bisection for the parameter where the verdict flips, to within 1e-12.
pub fn critical_exponent_scan(t: &FunctionalSet, family: &ExponentFamily, range: (f64, f64)) -> Result<ScanOutcome> {
    let (mut lo, mut hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return domain(format!("scan range needs lo < hi, got ({lo}, {hi})"));
    }
    let verdict = |s: f64| -> Result<bool> { Ok(check_integrability(t, &family.at(s)?)?.integrable) };
    let v_lo = verdict(lo)?;
    let v_hi = verdict(hi)?;
    if v_lo == v_hi {
        return Ok(ScanOutcome::Monotone { integrable: v_lo });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if verdict(mid)? == v_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ScanOutcome::Threshold { value: 0.5 * (lo + hi), integrable_above: v_hi })
}

/// Human-readable form such as "u1 - u2 + 1/2".
pub fn describe(f: &AffineFunctional) -> String {
    let mut out = String::new();
    let terms = f
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(k, c)| {
            let mag = c.abs();
            let body = if mag.is_one() { format!("u{}", k + 1) } else { format!("{mag}*u{}", k + 1) };
            (c.is_negative(), body)
        })
        .chain((!f.offset.is_zero()).then(|| (f.offset.is_negative(), f.offset.abs().to_string())));
    for (i, (neg, body)) in terms.enumerate() {
        match (i, neg) {
            (0, false) => {}
            (0, true) => out.push('-'),
            (_, false) => out.push_str(" + "),
            (_, true) => out.push_str(" - "),
        }
        out.push_str(&body);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_closure_and_padding() {
        let t = FunctionalSet::cyclic_differences(4).unwrap();
        assert_eq!(t.rank(t.full()), 3);
        let three = Subset::from_indices(&[0, 1, 3]);
        assert_eq!(span_closure(three, &t).unwrap(), t.full());
        assert_eq!(span_closure(Subset::EMPTY, &t).unwrap(), Subset::EMPTY);
        assert!(!is_padded(Subset::from_indices(&[2]), &t).unwrap());
        assert!(is_padded(t.full(), &t).unwrap());
        assert!(is_padded(Subset::EMPTY, &t).unwrap());
        assert_eq!(padded_subsets(&t), vec![Subset::EMPTY, t.full()]);
    }

    #[test]
    fn one_dimensional_example() {
        let t = FunctionalSet::new(vec![AffineFunctional::linear(&[1]).unwrap()]).unwrap();
        let v = check_integrability(&t, &ExponentAssignment::new(vec![0.0], vec![-2.0]).unwrap()).unwrap();
        assert!(v.integrable);
        let v = check_integrability(&t, &ExponentAssignment::new(vec![0.0], vec![-0.5]).unwrap()).unwrap();
        assert!(!v.integrable);
    }

    #[test]
    fn thresholds() {
        let t4 = FunctionalSet::cyclic_differences(4).unwrap();
        let t3 = FunctionalSet::cyclic_differences(3).unwrap();
        let at = |t: &FunctionalSet, f: &ExponentFamily| match critical_exponent_scan(t, f, (0.05, 1.0)).unwrap() {
            ScanOutcome::Threshold { value, integrable_above } => {
                assert!(integrable_above);
                value
            }
            other => panic!("{other:?}"),
        };
        assert!((at(&t4, &ExponentFamily::hurst_scan(4, -0.9)) - 0.25).abs() < 1e-9);
        assert!((at(&t3, &ExponentFamily::hurst_scan(3, -0.9)) - 1.0 / 3.0).abs() < 1e-9);
        assert!((at(&t4, &ExponentFamily::decay_scan(4, -0.3)) - 0.75).abs() < 1e-9);
    }

    #[test]
    fn rationals_parse_from_config() {
        let repr = FunctionalRepr {
            coefficients: vec![RationalRepr::Int(1), RationalRepr::Text("-1/2".into()), RationalRepr::Text("3".into())],
            offset: RationalRepr::Text("1/4".into()),
        };
        let f = AffineFunctional::try_from(repr).unwrap();
        assert_eq!(f.coefficients[1], BigRational::new((-1).into(), 2.into()));
        assert_eq!(describe(&f), "u1 - 1/2*u2 + 3*u3 + 1/4");
        let bad = FunctionalRepr { coefficients: vec![RationalRepr::Text("x".into())], offset: RationalRepr::Int(0) };
        assert!(AffineFunctional::try_from(bad).is_err());
    }
}
