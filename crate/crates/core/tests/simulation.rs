//! Statistical and structural checks of the samplers.

use nalgebra::DMatrix;
use rosenblatt_core::cumulant::{cumulant_quadratic_form, integral_i};
use rosenblatt_core::kernel::{hh_inner, HurstIndex, KernelSpec};
use rosenblatt_core::rng::RngSeed;
use rosenblatt_core::simulate::{
    sample_second_chaos, simulate_functionals, simulate_gaussian_ou, simulate_rosenblatt_paths, simulate_rou,
    simulate_rou_with_driver, simulate_stationary_rou, simulate_wr_integral, surrogate_covariance, InitialValue,
    Scheme,
};
use rosenblatt_core::stats::{covariance_with_error, empirical_cumulants, mean};

fn h(v: f64) -> HurstIndex {
    HurstIndex::new(v).unwrap()
}

fn spectral(cells: usize) -> Scheme {
    Scheme::Spectral { cells, compensate: true }
}

fn fbm_cov(hv: f64, s: f64, t: f64) -> f64 {
    0.5 * (s.powf(2.0 * hv) + t.powf(2.0 * hv) - (t - s).abs().powf(2.0 * hv))
}

#[test]
fn chaos_cumulants_match_quadratic_form() {
    let a = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, 0.1, -0.2, 0.15, 0.0, 0.15, 0.3]);
    let x = sample_second_chaos(&a, 200_000, RngSeed::new(3, 0)).unwrap();
    let k = empirical_cumulants(&x);
    for m in 1..=4 {
        let want = cumulant_quadratic_form(&a, m).unwrap();
        let z = (k.get(m).unwrap() - want) / k.error(m).unwrap();
        assert!(z.abs() < 4.5, "k{m}: {} vs {want} ({z:.2} se)", k.get(m).unwrap());
    }
}

#[test]
fn rosenblatt_paths_have_fbm_covariance() {
    let hv = 0.7;
    let times = [0.25, 0.5, 1.0];
    let fs: Vec<_> = times.iter().map(|&t| KernelSpec::indicator(t).unwrap()).collect();
    let cov = surrogate_covariance(&fs, h(hv), spectral(512)).unwrap();
    for (i, &s) in times.iter().enumerate() {
        for (j, &t) in times.iter().enumerate() {
            let want = fbm_cov(hv, s, t);
            assert!((cov[(i, j)] - want).abs() < 2e-3 * want, "({s}, {t}): {} vs {want}", cov[(i, j)]);
        }
    }
    let paths = simulate_rosenblatt_paths(h(hv), &times, spectral(512), 40_000, RngSeed::new(9, 0)).unwrap();
    for (i, &t) in times.iter().enumerate() {
        let col = paths.column(i);
        let m = mean(&col);
        let (var, se) = covariance_with_error(&col, &col);
        assert!(m.abs() < 4.5 * (var / col.len() as f64).sqrt(), "mean at {t}: {m}");
        assert!((var - t.powf(2.0 * hv)).abs() < 4.5 * se, "variance at {t}: {var}");
    }
    // increments are stationary: Var(Z(1) - Z(1/2)) = Var Z(1/2)
    let inc: Vec<f64> = paths.column(2).iter().zip(paths.column(1)).map(|(a, b)| a - b).collect();
    let (v, se) = covariance_with_error(&inc, &inc);
    assert!((v - 0.5f64.powf(2.0 * hv)).abs() < 4.5 * se);
}

#[test]
fn paths_are_deterministic_and_streams_differ() {
    let times = [0.5, 1.0];
    let a = simulate_rosenblatt_paths(h(0.8), &times, spectral(64), 300, RngSeed::new(4, 0)).unwrap();
    let b = simulate_rosenblatt_paths(h(0.8), &times, spectral(64), 300, RngSeed::new(4, 0)).unwrap();
    let c = simulate_rosenblatt_paths(h(0.8), &times, spectral(64), 300, RngSeed::new(4, 1)).unwrap();
    assert_eq!(a.values, b.values);
    assert_ne!(a.values, c.values);
    // a longer run extends the shorter one
    let d = simulate_rosenblatt_paths(h(0.8), &times, spectral(64), 600, RngSeed::new(4, 0)).unwrap();
    assert_eq!(a.values, d.values.rows(0, 300).into_owned());
}

#[test]
fn family_samples_are_linear_in_the_integrand() {
    let f = KernelSpec::rou_combination(&[1.0], &[1.0], 0.7, 1.0).unwrap();
    let g = KernelSpec::indicator(0.6).unwrap();
    let fg = f.scaled(2.0).plus(&g.scaled(-0.5));
    for scheme in [spectral(128), Scheme::NoiseGrid { inner_cells: 48, tolerance: 1e-3, compensate: false }] {
        let x = simulate_functionals(&[f.clone(), g.clone(), fg.clone()], h(0.75), scheme, 200, RngSeed::new(1, 0)).unwrap();
        for i in 0..200 {
            let want = 2.0 * x[(i, 0)] - 0.5 * x[(i, 1)];
            assert!((x[(i, 2)] - want).abs() < 1e-9 * (1.0 + want.abs()), "{} {} vs {want}", scheme.name(), x[(i, 2)]);
        }
    }
}

#[test]
fn single_integral_agrees_in_law_with_family() {
    let f = KernelSpec::rou_combination(&[1.0, -0.5], &[0.5, 1.0], 1.0, 1.0).unwrap();
    let x = simulate_wr_integral(&f, h(0.8), spectral(256), 100_000, RngSeed::new(21, 0)).unwrap();
    let k = empirical_cumulants(&x);
    let var = hh_inner(&f, &f, h(0.8)).unwrap();
    assert!((k.get(2).unwrap() - var).abs() < 4.5 * k.error(2).unwrap());
}

#[test]
fn rou_starts_at_initial_value_and_decays_in_mean() {
    let xi = InitialValue::Normal { mean: 2.0, sd: 0.5 };
    let times = [0.0, 0.5, 1.5];
    let (lambda, sigma) = (1.2, 0.8);
    let draw = simulate_rou_with_driver(xi, lambda, sigma, h(0.7), &times, spectral(256), 20_000, RngSeed::new(8, 0)).unwrap();
    assert_eq!(draw.rou.column(0), draw.initial);
    assert!(draw.driver.column(0).iter().all(|&z| z == 0.0));
    for (j, &t) in times.iter().enumerate().skip(1) {
        let col = draw.rou.column(j);
        let (var, _) = covariance_with_error(&col, &col);
        let m = mean(&col);
        assert!((m - 2.0 * (-lambda * t).exp()).abs() < 4.5 * (var / col.len() as f64).sqrt(), "t={t}: {m}");
    }
}

#[test]
fn langevin_residual_vanishes_under_refinement() {
    // Y(1) - ξ + λ∫_0^1 Y - σZ(1) with the integral by the trapezoidal rule
    let (lambda, sigma) = (1.5, 0.9);
    let xi = InitialValue::Normal { mean: 0.5, sd: 1.0 };
    let mut last = f64::INFINITY;
    for steps in [4usize, 16, 64] {
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let d = simulate_rou_with_driver(xi, lambda, sigma, h(0.75), &times, spectral(256), 2000, RngSeed::new(12, 0)).unwrap();
        let dt = 1.0 / steps as f64;
        let mut ms = 0.0;
        for i in 0..2000 {
            let y = d.rou.values.row(i);
            let integral: f64 = (0..steps).map(|k| 0.5 * dt * (y[k] + y[k + 1])).sum();
            let r = y[steps] - d.initial[i] + lambda * integral - sigma * d.driver.values[(i, steps)];
            ms += r * r;
        }
        let rms = (ms / 2000.0).sqrt();
        assert!(rms < 0.5 * last, "steps={steps}: rms {rms} after {last}");
        last = rms;
    }
    assert!(last < 5e-3);
}

#[test]
fn zero_time_rou_is_the_initial_value() {
    let xi = InitialValue::Constant { value: 1.25 };
    let y = simulate_rou(xi, 1.0, 1.0, h(0.6), &[0.0], spectral(32), 10, RngSeed::new(1, 0)).unwrap();
    assert!(y.column(0).iter().all(|&v| v == 1.25));
}

#[test]
fn stationary_rou_covariance_depends_on_lag_only() {
    let (lambda, sigma, hv) = (1.0, 0.6, 0.7);
    let times = [0.0, 0.5, 1.0, 1.5];
    let fs: Vec<_> = times
        .iter()
        .map(|&t| KernelSpec::stationary_rou_combination(&[1.0], &[t], lambda, sigma).unwrap())
        .collect();
    let cov = surrogate_covariance(&fs, h(hv), spectral(1024)).unwrap();
    let var0 = sigma * sigma * integral_i(0.0, h(hv), lambda).unwrap();
    for i in 0..4 {
        assert!((cov[(i, i)] - var0).abs() < 5e-3 * var0, "var at {}: {} vs {var0}", times[i], cov[(i, i)]);
    }
    let lag1 = sigma * sigma * integral_i(0.5, h(hv), lambda).unwrap();
    for i in 0..3 {
        assert!((cov[(i, i + 1)] - lag1).abs() < 5e-3 * var0);
    }
    let x = simulate_stationary_rou(lambda, sigma, h(hv), &times, spectral(512), 20_000, RngSeed::new(30, 0)).unwrap();
    let col = x.column(3);
    let (v, se) = covariance_with_error(&col, &col);
    assert!((v - var0).abs() < 4.5 * se);
}

#[test]
fn gaussian_ou_decorrelates_exponentially() {
    let (lambda, sigma) = (2.0, 1.0);
    let times = [0.0, 0.25, 0.5, 1.0];
    let x = simulate_gaussian_ou(InitialValue::default(), lambda, sigma, &times, 40_000, RngSeed::new(2, 0), true).unwrap();
    let v = sigma * sigma / (2.0 * lambda);
    for j in 1..4 {
        let (c, se) = covariance_with_error(&x.column(0), &x.column(j));
        let want = v * (-lambda * times[j]).exp();
        assert!((c - want).abs() < 4.5 * se, "lag {}: {c} vs {want}", times[j]);
    }
}

#[test]
fn noise_grid_matches_target_covariance_with_compensation() {
    let hv = 0.7;
    let times = [0.5, 1.0];
    let fs: Vec<_> = times.iter().map(|&t| KernelSpec::indicator(t).unwrap()).collect();
    let scheme = Scheme::NoiseGrid { inner_cells: 32, tolerance: 1e-3, compensate: true };
    let cov = surrogate_covariance(&fs, h(hv), scheme).unwrap();
    for (i, &s) in times.iter().enumerate() {
        for (j, &t) in times.iter().enumerate() {
            assert!((cov[(i, j)] - fbm_cov(hv, s, t)).abs() < 1e-9);
        }
    }
    let raw = surrogate_covariance(&fs, h(hv), Scheme::NoiseGrid { inner_cells: 32, tolerance: 1e-3, compensate: false }).unwrap();
    assert!(raw[(1, 1)] < cov[(1, 1)]);
    let x = simulate_functionals(&fs, h(hv), scheme, 20_000, RngSeed::new(5, 0)).unwrap();
    let col: Vec<f64> = x.column(1).iter().copied().collect();
    let (v, se) = covariance_with_error(&col, &col);
    assert!((v - 1.0).abs() < 4.5 * se);
}

#[test]
fn subcritical_hurst_is_rejected() {
    let err = simulate_rosenblatt_paths(HurstIndex::relaxed(0.4).unwrap(), &[1.0], spectral(32), 10, RngSeed::new(1, 0));
    assert!(err.is_err());
}
