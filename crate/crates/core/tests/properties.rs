//! Randomised invariants.

mod common;

use common::{bareiss_rank, ks_statistic};
use nalgebra::DMatrix;
use num_rational::BigRational;
use proptest::prelude::*;
use rosenblatt_core::cumulant::cumulant_quadratic_form;
use rosenblatt_core::kernel::{hh_inner, rosenblatt_kernel_l, HurstIndex, KernelSpec};
use rosenblatt_core::limits::{ks_test, DistributionTarget};
use rosenblatt_core::power_counting::{span_closure, AffineFunctional, FunctionalSet, Subset};
use rosenblatt_core::quad::GridSpec;
use rosenblatt_core::rng::RngSeed;
use rosenblatt_core::stats::empirical_cumulants;

fn functional_set(rows: &[Vec<i64>]) -> Option<FunctionalSet> {
    let fs: Option<Vec<_>> = rows.iter().map(|r| AffineFunctional::linear(r).ok()).collect();
    FunctionalSet::new(fs?).ok()
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..4, 1usize..7).prop_flat_map(|(d, n)| prop::collection::vec(prop::collection::vec(-2i64..3, d), n))
}

fn ou(lambda: f64, t: f64) -> KernelSpec {
    KernelSpec::rou_combination(&[1.0], &[t], lambda, 1.0).unwrap()
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn rank_matches_integer_elimination(rows in rows_strategy(), mask in any::<u32>()) {
        if let Some(t) = functional_set(&rows) {
            let w = Subset(mask & t.full().0);
            let picked: Vec<Vec<i64>> = w.indices().into_iter().map(|i| rows[i].clone()).collect();
            let r = t.rank(w);
            prop_assert_eq!(r, bareiss_rank(&picked));
            prop_assert!(r <= w.len() && r <= t.dimension());
        }
    }

    #[test]
    fn closure_is_idempotent_and_monotone(rows in rows_strategy(), a in any::<u32>(), b in any::<u32>()) {
        if let Some(t) = functional_set(&rows) {
            let w = Subset(a & t.full().0);
            let v = Subset(w.0 & b);
            let cw = span_closure(w, &t).unwrap();
            prop_assert!(w.is_subset_of(cw));
            prop_assert_eq!(span_closure(cw, &t).unwrap(), cw);
            prop_assert_eq!(t.rank(cw), t.rank(w));
            prop_assert!(span_closure(v, &t).unwrap().is_subset_of(cw));
        }
    }

    #[test]
    fn rational_rank_ignores_scaling(rows in rows_strategy(), k in 1i64..5) {
        let scaled: Vec<Vec<BigRational>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| BigRational::new(x.into(), k.into())).collect())
            .collect();
        let refs: Vec<&[BigRational]> = scaled.iter().map(|r| r.as_slice()).collect();
        prop_assert_eq!(rosenblatt_core::power_counting::rational_rank(&refs), bareiss_rank(&rows));
    }

    #[test]
    fn quadratic_form_cumulants_scale(entries in prop::collection::vec(-1.0f64..1.0, 9), s in 0.2f64..3.0) {
        let raw = DMatrix::from_row_slice(3, 3, &entries);
        let a = (&raw + raw.transpose()) * 0.5;
        let k2 = cumulant_quadratic_form(&a, 2).unwrap();
        prop_assert!((k2 - 2.0 * a.norm_squared()).abs() <= 1e-12 * k2.max(1.0));
        for m in 2..=5 {
            let k = cumulant_quadratic_form(&a, m).unwrap();
            let ks = cumulant_quadratic_form(&(&a * s), m).unwrap();
            prop_assert!((ks - s.powi(m as i32) * k).abs() <= 1e-10 * ks.abs().max(1.0));
        }
    }

    #[test]
    fn distribution_cdfs_are_monotone(a in -2.0f64..2.0, v in 0.1f64..4.0, xs in prop::collection::vec(-10.0f64..10.0, 2..20)) {
        prop_assume!(a.abs() > 1e-3);
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        for target in [DistributionTarget::Gaussian { variance: v }, DistributionTarget::ScaledCenteredChisq { a, shift: 0.0 }] {
            let ps: Vec<f64> = xs.iter().map(|&x| target.cdf(x)).collect();
            prop_assert!(ps.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!(ps.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn normals_are_deterministic(seed in any::<u64>(), stream in 0u64..8, index in 0u64..1000) {
        let s = RngSeed::new(seed, stream);
        let mut a = vec![0.0; 16];
        let mut b = vec![0.0; 16];
        s.fill_normals(index, &mut a);
        s.fill_normals(index, &mut b);
        prop_assert_eq!(&a, &b);
        s.substream(1).fill_normals(index, &mut b);
        prop_assert_ne!(a, b);
    }

    #[test]
    fn grid_edges_increase(lo in -5.0f64..5.0, len in 0.1f64..10.0, cells in 1usize..200, g in 1.0f64..3.0) {
        let grid = GridSpec::new(lo, lo + len, cells, g).unwrap();
        let e = grid.edges();
        prop_assert_eq!(e.len(), cells + 1);
        prop_assert!(e.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(e[0], lo);
        prop_assert!((e[cells] - (lo + len)).abs() < 1e-12 * len.max(1.0));
    }

    #[test]
    fn higher_cumulants_ignore_shifts(xs in prop::collection::vec(-5.0f64..5.0, 10..60), c in -10.0f64..10.0) {
        let a = empirical_cumulants(&xs);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let b = empirical_cumulants(&shifted);
        prop_assert!((b.get(1).unwrap() - a.get(1).unwrap() - c).abs() < 1e-9);
        for m in 2..=4 {
            prop_assert!((b.get(m).unwrap() - a.get(m).unwrap()).abs() < 1e-7 * a.get(m).unwrap().abs().max(1.0));
        }
    }

    #[test]
    fn ks_statistic_in_unit_interval(seed in any::<u64>(), v in 0.5f64..2.0) {
        let mut xs = vec![0.0; 1000];
        RngSeed::new(seed, 0).fill_normals(0, &mut xs);
        let target = DistributionTarget::Gaussian { variance: v };
        let r = ks_test(&xs, &target, None).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        let want = ks_statistic(&xs, |x| target.cdf(x));
        prop_assert!((r.statistic - want).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn inner_product_is_symmetric_and_bilinear(
        hv in 0.52f64..0.98,
        l1 in 0.2f64..3.0, l2 in 0.2f64..3.0,
        t1 in 0.2f64..2.0, t2 in 0.2f64..2.0,
        a in -2.0f64..2.0, b in -2.0f64..2.0,
    ) {
        let h = HurstIndex::new(hv).unwrap();
        let (f, g) = (ou(l1, t1), ou(l2, t2));
        let k = KernelSpec::indicator(1.0).unwrap();
        let fg = hh_inner(&f, &g, h).unwrap();
        prop_assert!((fg - hh_inner(&g, &f, h).unwrap()).abs() <= 1e-10 * fg.abs().max(1e-3));
        let lhs = hh_inner(&f.scaled(a).plus(&g.scaled(b)), &k, h).unwrap();
        let rhs = a * hh_inner(&f, &k, h).unwrap() + b * hh_inner(&g, &k, h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (a.abs() + b.abs()).max(1.0));
        let ff = hh_inner(&f, &f, h).unwrap();
        prop_assert!(ff > 0.0);
        // Cauchy-Schwarz
        prop_assert!(fg * fg <= ff * hh_inner(&g, &g, h).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn rosenblatt_kernel_symmetric_nonnegative(hv in 0.52f64..0.98, t in 0.5f64..3.0, y1 in -3.0f64..3.0, y2 in -3.0f64..3.0) {
        prop_assume!((y1 - y2).abs() > 1e-6);
        let h = HurstIndex::new(hv).unwrap();
        let grid = GridSpec::uniform(0.0, t, 8).unwrap();
        let a = rosenblatt_kernel_l(h, t, y1, y2, &grid).unwrap();
        let b = rosenblatt_kernel_l(h, t, y2, y1, &grid).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-12));
        if y1.max(y2).max(0.0) >= t {
            prop_assert_eq!(a, 0.0);
        }
    }
}
