//! Sample statistics with delta-method standard errors.

use crate::cumulant::CumulantVector;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Empirical k₁..k₄ from central sample moments. The error estimates are
/// standard errors from the influence functions
/// k₂: x² - μ₂, k₃: x³ - μ₃ - 3μ₂x, k₄: x⁴ - μ₄ - 4μ₃x - 6μ₂(x² - μ₂)
/// with x centred at the sample mean.
pub fn empirical_cumulants(samples: &[f64]) -> CumulantVector {
    let n = samples.len() as f64;
    let m = mean(samples);
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &v in samples {
        let x = v - m;
        let x2 = x * x;
        s2 += x2;
        s3 += x2 * x;
        s4 += x2 * x2;
    }
    let (m2, m3, m4) = (s2 / n, s3 / n, s4 / n);
    let k4 = m4 - 3.0 * m2 * m2;
    let infl = |f: &dyn Fn(f64) -> f64| -> f64 {
        let vals: Vec<f64> = samples.iter().map(|&v| f(v - m)).collect();
        let mu = mean(&vals);
        let var = vals.iter().map(|z| (z - mu) * (z - mu)).sum::<f64>() / n;
        (var / n).sqrt()
    };
    let mut out = CumulantVector::default();
    out.insert(1, m, (m2 / n).sqrt());
    out.insert(2, m2, infl(&|x| x * x - m2));
    out.insert(3, m3, infl(&|x| x * x * x - m3 - 3.0 * m2 * x));
    out.insert(4, k4, infl(&|x| x.powi(4) - m4 - 4.0 * m3 * x - 6.0 * m2 * (x * x - m2)));
    out
}

/// Sample covariance and its standard error.
pub fn covariance_with_error(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let c = mean(&prods);
    let var = prods.iter().map(|p| (p - c) * (p - c)).sum::<f64>() / n;
    (c, (var / n).sqrt())
}

/// Ordinary least-squares slope and intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
