//! Checks of the limit theorems as H ↓ 1/2 and H ↑ 1: cumulant sweeps,
//! Kolmogorov-Smirnov tests, covariance and increment checks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulant::{chi2_limit_cumulants, cumulants_wr_trace, gaussian_limit_variance, trace_grid, CumulantVector};
use crate::error::{domain, Result};
use crate::kernel::{hh_inner, HurstIndex, KernelSpec};
use crate::simulate::PathEnsemble;
use crate::stats::covariance_with_error;

/// Cells used by the trace backend in sweeps and limit checks.
pub const DEFAULT_TRACE_CELLS: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub hurst: f64,
    pub cumulants: CumulantVector,
    /// k₄ / (12 H²): the fourth-order contraction integral times (2H-1)²
    pub contraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub orders: Vec<usize>,
    /// targets of the chi-square limit as H → 1
    pub chi2_targets: BTreeMap<usize, f64>,
    /// targets of the Gaussian limit as H → 1/2: (0, σ_f², 0, 0)
    pub gaussian_targets: BTreeMap<usize, f64>,
}

impl SweepResult {
    pub fn value(&self, i: usize, m: usize) -> Option<f64> {
        self.points.get(i)?.cumulants.get(m)
    }

    /// Relative deviation |k_m - target| / |target| (absolute when the
    /// target is 0).
    pub fn deviation(&self, i: usize, m: usize, target: f64) -> Option<f64> {
        let v = self.value(i, m)?;
        Some(if target == 0.0 { v.abs() } else { (v - target).abs() / target.abs() })
    }
}

/// Trace-backend cumulants of ∫ f dZ^H along `hursts`, with both limit
/// targets. The Gaussian target needs f supported in [0, ∞) or a stationary
/// OU combination; otherwise it is left empty.
pub fn cumulant_sweep(f: &KernelSpec, hursts: &[f64], orders: &[usize], cells: usize) -> Result<SweepResult> {
    for &m in orders {
        if !(1..=4).contains(&m) {
            return domain(format!("sweep orders must lie in 1..=4, got {m}"));
        }
    }
    let hs = hursts.iter().map(|&h| HurstIndex::new(h)).collect::<Result<Vec<_>>>()?;
    let grid = trace_grid(f, cells)?;
    let points = hs
        .par_iter()
        .map(|&h| {
            let full = cumulants_wr_trace(f, h, &grid)?;
            let mut cumulants = CumulantVector::default();
            for &m in orders {
                cumulants.insert(m, full.get(m).unwrap(), full.error(m).unwrap());
            }
            let hv = h.value();
            Ok(SweepPoint { hurst: hv, cumulants, contraction: full.get(4).unwrap() / (12.0 * hv * hv) })
        })
        .collect::<Result<Vec<_>>>()?;
    let chi2_targets = orders.iter().map(|&m| (m, chi2_limit_cumulants(f, m))).collect();
    let gaussian_targets = match gaussian_limit_variance(f, None) {
        Ok(v) => orders.iter().map(|&m| (m, if m == 2 { v } else { 0.0 })).collect(),
        Err(_) => BTreeMap::new(),
    };
    Ok(SweepResult { points, orders: orders.to_vec(), chi2_targets, gaussian_targets })
}

/// Limit laws for Kolmogorov-Smirnov tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionTarget {
    /// N(0, variance)
    Gaussian { variance: f64 },
    /// a(Z² - 1) + shift
    ScaledCenteredChisq { a: f64, shift: f64 },
}

impl DistributionTarget {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistributionTarget::Gaussian { variance } => {
                if variance == 0.0 {
                    return if x >= 0.0 { 1.0 } else { 0.0 };
                }
                0.5 * (1.0 + libm::erf(x / (2.0 * variance).sqrt()))
            }
            DistributionTarget::ScaledCenteredChisq { a, shift } => {
                if a == 0.0 {
                    return if x >= shift { 1.0 } else { 0.0 };
                }
                // P(Z² ≤ y) = erf(sqrt(y/2))
                let y = (x - shift) / a + 1.0;
                let below = if y <= 0.0 { 0.0 } else { libm::erf((y / 2.0).sqrt()) };
                if a > 0.0 {
                    below
                } else {
                    1.0 - below
                }
            }
        }
    }

    /// The chi-square limit of ∫ f dZ^H: (∫f/√2)(Z² - 1).
    pub fn chi2_limit(f: &KernelSpec) -> Self {
        DistributionTarget::ScaledCenteredChisq { a: crate::kernel::integral_of_f(f) / 2f64.sqrt(), shift: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub threshold: f64,
    pub samples: usize,
    pub pass: bool,
}

/// 1% critical value of the one-sample KS statistic, 1.63/√n.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Two-sided Kolmogorov-Smirnov statistic against `target`. The default
/// threshold is the 1% critical value.
pub fn ks_test(samples: &[f64], target: &DistributionTarget, threshold: Option<f64>) -> Result<KsReport> {
    let n = samples.len();
    if n < 1000 {
        return domain(format!("KS test needs at least 1000 samples, got {n}"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return domain("KS test got a non-finite sample");
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let c = target.cdf(v);
        d = d.max(c - i as f64 / nf).max((i + 1) as f64 / nf - c);
    }
    let threshold = threshold.unwrap_or_else(|| ks_critical_1pct(n));
    Ok(KsReport { statistic: d, threshold, samples: n, pass: d <= threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouMode {
    Nonstationary,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddReport {
    pub hurst: f64,
    pub mode: RouMode,
    pub kernel: KernelSpec,
    pub cumulants: CumulantVector,
    /// ‖f‖²_{H_H} by quadrature
    pub variance: f64,
    /// k_m of the chi-square limit, m = 2, 3, 4
    pub chi2_targets: BTreeMap<usize, f64>,
    /// variance of the Gaussian-OU limit
    pub gaussian_variance: f64,
}

impl FddReport {
    /// Largest relative deviation of k₂..k₄ from the chi-square targets.
    pub fn chi2_deviation(&self) -> f64 {
        self.chi2_targets
            .iter()
            .map(|(&m, &t)| {
                let v = self.cumulants.get(m).unwrap_or(0.0);
                if t == 0.0 { v.abs() } else { (v - t).abs() / t.abs() }
            })
            .fold(0.0, f64::max)
    }

    /// Relative deviation of the variance from the Gaussian-OU variance.
    pub fn gaussian_deviation(&self) -> f64 {
        if self.gaussian_variance == 0.0 {
            self.variance.abs()
        } else {
            (self.variance - self.gaussian_variance).abs() / self.gaussian_variance
        }
    }
}

/// Law of Σ α_j (Y(t_j) - e^{-λ t_j} ξ) (nonstationary, started at 0) or of
/// Σ α_j X(t_j) (stationary), against both limits.
pub fn fdd_check_rou(
    alphas: &[f64],
    times: &[f64],
    lambda: f64,
    sigma: f64,
    h: HurstIndex,
    mode: RouMode,
) -> Result<FddReport> {
    let f = match mode {
        RouMode::Nonstationary => KernelSpec::rou_combination(alphas, times, lambda, sigma)?,
        RouMode::Stationary => KernelSpec::stationary_rou_combination(alphas, times, lambda, sigma)?,
    };
    let grid = trace_grid(&f, DEFAULT_TRACE_CELLS)?;
    let cumulants = cumulants_wr_trace(&f, h, &grid)?;
    let variance = hh_inner(&f, &f, h)?;
    let chi2_targets = (2..=4).map(|m| (m, chi2_limit_cumulants(&f, m))).collect();
    let gaussian_variance = if f.is_zero() { 0.0 } else { gaussian_limit_variance(&f, Some(lambda))? };
    Ok(FddReport { hurst: h.value(), mode, kernel: f, cumulants, variance, chi2_targets, gaussian_variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub s: f64,
    pub t: f64,
    pub empirical: f64,
    pub standard_error: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub entries: Vec<CovarianceEntry>,
    pub max_abs_deviation: f64,
    /// max |empirical - target| / standard error
    pub max_band_ratio: f64,
}

impl CovarianceReport {
    pub fn within_band(&self, k: f64) -> bool {
        self.entries.iter().all(|e| (e.empirical - e.target).abs() <= k * e.standard_error)
    }
}

/// Empirical covariance of every pair of columns against `target(s, t)`.
pub fn covariance_check<F: Fn(f64, f64) -> f64>(ensemble: &PathEnsemble, target: F) -> Result<CovarianceReport> {
    let n = ensemble.samples();
    if n < 10_000 {
        return domain(format!("covariance check needs at least 10^4 samples, got {n}"));
    }
    let cols: Vec<Vec<f64>> = (0..ensemble.times.len()).map(|k| ensemble.column(k)).collect();
    let mut entries = Vec::new();
    for i in 0..cols.len() {
        for j in i..cols.len() {
            let (c, se) = covariance_with_error(&cols[i], &cols[j]);
            let (s, t) = (ensemble.times[i], ensemble.times[j]);
            entries.push(CovarianceEntry { s, t, empirical: c, standard_error: se, target: target(s, t) });
        }
    }
    let max_abs_deviation = entries.iter().map(|e| (e.empirical - e.target).abs()).fold(0.0, f64::max);
    let max_band_ratio = entries
        .iter()
        .map(|e| {
            let d = (e.empirical - e.target).abs();
            if e.standard_error > 0.0 { d / e.standard_error } else if d == 0.0 { 0.0 } else { f64::INFINITY }
        })
        .fold(0.0, f64::max);
    Ok(CovarianceReport { entries, max_abs_deviation, max_band_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub hurst: Vec<f64>,
    pub norms: Vec<f64>,
    pub limit: f64,
    pub deviations: Vec<f64>,
    /// deviations strictly decrease along the given order of H
    pub decreasing: bool,
}

/// ‖f‖²_{H_H} against ∫f² along `hursts`, for f supported in [0, ∞).
pub fn identity_approximation_check(f: &KernelSpec, hursts: &[f64]) -> Result<IdentityReport> {
    if f.atoms.iter().any(|a| a.weight != 0.0 && a.left_end < 0.0) {
        return domain("the approximation of the identity needs f supported in [0, ∞)");
    }
    let limit = gaussian_limit_variance(f, None)?;
    let norms = hursts
        .par_iter()
        .map(|&h| hh_inner(f, f, HurstIndex::new(h)?))
        .collect::<Result<Vec<_>>>()?;
    let deviations: Vec<f64> = norms.iter().map(|v| (v - limit).abs()).collect();
    let decreasing = deviations.windows(2).all(|w| w[1] < w[0]) || deviations.iter().all(|&d| d == 0.0);
    Ok(IdentityReport { hurst: hursts.to_vec(), norms, limit, deviations, decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    pub p: u32,
    pub lags: Vec<f64>,
    /// E|Y(t+δ) - Y(t)|^{2p}, averaged over t on the grid
    pub moments: Vec<f64>,
    /// moment / δ^p
    pub constants: Vec<f64>,
    pub slope: f64,
    /// the constant grows by at most 10% per halving of the lag
    pub stable: bool,
    pub pass: bool,
}

/// Log-log fit of increment moments against dyadic lags on a uniform time
/// grid. Lags run from the grid step up to a quarter of the time span.
pub fn increment_bound_check(ensemble: &PathEnsemble, p: u32) -> Result<IncrementReport> {
    if !(p == 1 || p == 2) {
        return domain(format!("increment check supports p ∈ {{1, 2}}, got {p}"));
    }
    let times = &ensemble.times;
    if times.len() < 5 {
        return domain("increment check needs at least 5 times");
    }
    let step = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step) {
        return domain("increment check needs a uniform time grid");
    }
    let span = times[times.len() - 1] - times[0];
    let mut lags = Vec::new();
    let mut moments = Vec::new();
    let mut k = 1;
    while (k as f64) * step <= span / 4.0 + 1e-12 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for j in 0..times.len() - k {
            let a = ensemble.values.column(j);
            let b = ensemble.values.column(j + k);
            for (x, y) in a.iter().zip(b.iter()) {
                acc += (y - x).powi(2 * p as i32);
            }
            count += a.len();
        }
        lags.push(k as f64 * step);
        moments.push(acc / count as f64);
        k *= 2;
    }
    if lags.len() < 2 {
        return domain("increment check needs at least two dyadic lags");
    }
    let x: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let (slope, _) = crate::stats::linear_fit(&x, &y);
    let constants: Vec<f64> = moments.iter().zip(&lags).map(|(m, l)| m / l.powi(p as i32)).collect();
    // constants are listed from the finest lag up
    let stable = constants.windows(2).all(|w| w[0] <= 1.1 * w[1]);
    let pass = slope >= p as f64 - 0.1 && stable;
    Ok(IncrementReport { p, lags, moments, constants, slope, stable, pass })
}
