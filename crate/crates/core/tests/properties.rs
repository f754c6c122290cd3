use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use spdelab_core::constants::{c_infinity, c_two_alpha};
use spdelab_core::girsanov::deterministic_entropy;
use spdelab_core::heat_kernel::build_generator;
use spdelab_core::martingale::Features;
use spdelab_core::solver::{l2_norm, sup_norm};
use spdelab_core::stats::{least_squares, Bootstrap};
use spdelab_core::transport::assignment;
use spdelab_core::{
    Boundary, CounterNoise, DriftSpec, Grid, KernelOptions, KernelTable, LipschitzData, NoiseRows,
    NoiseSheet, OperatorSpec, SeedSpec, Verdict,
};

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Dirichlet), Just(Boundary::Neumann), Just(Boundary::Periodic)]
}

fn grid() -> impl Strategy<Value = Grid> {
    (0.1f64..3.0, 0.2f64..4.0, 2usize..12, 3usize..12)
        .prop_map(|(t, d, nt, nx)| Grid::new(t, d, nt, nx).unwrap())
}

fn brute_force(cost: &DMatrix<f64>) -> f64 {
    fn rec(cost: &DMatrix<f64>, row: usize, used: &mut [bool]) -> f64 {
        if row == cost.nrows() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..cost.ncols() {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[(row, c)] + rec(cost, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    rec(cost, 0, &mut vec![false; cost.ncols()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noise_is_a_pure_function_of_seed_and_cell(g in grid(), master in any::<u64>(), replica in any::<u32>()) {
        let seed = SeedSpec::new(master, replica);
        let sheet = NoiseSheet::sample(&g, seed);
        let lazy = CounterNoise::new(g, seed);
        let mut row = vec![0.0; g.nx()];
        for i in (0..g.nt()).rev() {
            lazy.fill_row(i, &mut row);
            prop_assert_eq!(&row[..], sheet.row(i));
        }
        prop_assert!(sheet.increments().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tilting_is_invertible(g in grid(), c in -3.0f64..3.0, seed in any::<u64>()) {
        let sheet = NoiseSheet::sample(&g, SeedSpec::new(seed, 0));
        let drift = vec![c; g.nt() * g.nx()];
        let back = sheet.tilt(&drift).unwrap().tilt(&drift.iter().map(|x| -x).collect::<Vec<_>>()).unwrap();
        for (a, b) in back.increments().iter().zip(sheet.increments()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn generator_conserves_mass(b in prop_oneof![Just(Boundary::Neumann), Just(Boundary::Periodic)],
                                a in 0.3f64..3.0, nx in 3usize..40) {
        let grid = Grid::new(1.0, 1.0, 2, nx).unwrap();
        let op = OperatorSpec { a: spdelab_core::presets::Coefficient::constant(a), ..OperatorSpec::heat(b) };
        let gen = build_generator(&op, &grid).unwrap();
        for r in gen.row_iter() {
            prop_assert!(r.sum().abs() <= 1e-9 * r.amax());
        }
    }

    #[test]
    fn kernel_is_a_sub_probability(b in boundary(), nx in 3usize..24, horizon in 0.05f64..2.0) {
        let grid = Grid::new(horizon, 1.0, 4, nx).unwrap();
        let t = KernelTable::build(&OperatorSpec::heat(b), &grid, KernelOptions::default()).unwrap();
        let (_, hi) = t.mass_range();
        prop_assert!(hi <= 1.0 + 1e-9);
        for i in 0..=4 {
            prop_assert!(t.kernel(i).min() >= -1e-10 * t.kernel(i).max());
        }
        let h = t.h_function();
        prop_assert!(h.iter().all(|&v| v >= 0.0));
        prop_assert!(t.g_total() >= 0.0);
    }

    #[test]
    fn norm_relations(g in grid(), values in prop::collection::vec(-5.0f64..5.0, 13 * 12)) {
        let n = (g.nt() + 1) * g.nx();
        let v = &values[..n];
        let flipped: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert_eq!(sup_norm(v), sup_norm(&flipped));
        let l2 = l2_norm(&g, v);
        prop_assert!(l2 * l2 <= g.horizon() * g.length() * sup_norm(v).powi(2) * (1.0 + 1e-12));
        let c = v[0];
        let flat = vec![c; n];
        prop_assert!((l2_norm(&g, &flat) - c.abs() * (g.horizon() * g.length()).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn constant_drift_entropy(g in grid(), c in -4.0f64..4.0) {
        let h = deterministic_entropy(&DriftSpec::constant(c), &g).unwrap();
        let exact = 0.5 * c * c * g.horizon() * g.length();
        prop_assert!((h - exact).abs() <= 1e-14 * exact.max(1.0));
    }

    #[test]
    fn hungarian_is_optimal(n in 1usize..7, seed in any::<u64>()) {
        let mut rng_state = seed;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let cost = DMatrix::from_fn(n, n, |_, _| next() * 10.0);
        let plan = assignment(&cost);
        let mut seen = vec![false; n];
        for &j in &plan {
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
        let total: f64 = plan.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
        prop_assert!((total - brute_force(&cost)).abs() < 1e-9);
    }

    #[test]
    fn least_squares_recovers_exact_fits(coef in prop::collection::vec(-5.0f64..5.0, 3), scale in 1e-3f64..1e3) {
        let design = DMatrix::from_fn(20, 3, |r, c| (((r + 1) * (c + 2)) as f64 * 0.37).sin() * scale.powi(c as i32));
        let beta = DVector::from_vec(coef.clone());
        let target = &design * &beta;
        let fit = least_squares(&design, &target).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&coef) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn feature_count_is_binomial(vars in 1usize..5, degree in 0usize..5) {
        let f = Features::new(vars, degree);
        let binom = (1..=vars).fold(1usize, |acc, k| acc * (degree + k) / k);
        prop_assert_eq!(f.len(), binom);
    }

    #[test]
    fn verdict_orders_intervals(lo in -2.0f64..2.0, width in 0.0f64..2.0) {
        let v = Verdict::from_interval(lo, lo + width, 1.0);
        match v {
            Verdict::Pass => prop_assert!(lo + width < 1.0),
            Verdict::Fail => prop_assert!(lo > 1.0),
            Verdict::Inconclusive => prop_assert!(lo <= 1.0 && lo + width >= 1.0),
        }
    }

    #[test]
    fn constants_are_monotone(g in 0.01f64..1.0, lg in 0.0f64..2.0, t in 0.1f64..2.0,
                              ls in 0.0f64..1.0, k in 0.1f64..2.0, alpha in 1.05f64..1.95) {
        prop_assert!(c_infinity(g, lg, t).unwrap() <= c_infinity(g, lg + 0.1, t).unwrap());
        prop_assert!(c_infinity(g, lg, t).unwrap() <= c_infinity(g * 1.1, lg, t).unwrap());
        let d = LipschitzData { l_g: lg, l_sigma: ls, k_sigma: k };
        let louder = LipschitzData { k_sigma: k * 1.5, ..d };
        match (c_two_alpha(&d, g, g, t, 1.0, alpha), c_two_alpha(&louder, g, g, t, 1.0, alpha)) {
            (Ok(a), Ok(b)) => prop_assert!(a <= b),
            (Ok(_), Err(_)) | (Err(_), Err(_)) => {}
            (Err(e), Ok(_)) => prop_assert!(false, "quieter noise overflowed: {e}"),
        }
    }

    #[test]
    fn bootstrap_is_reproducible(xs in prop::collection::vec(-10.0f64..10.0, 2..60), seed in any::<u64>()) {
        let b = Bootstrap { resamples: 50, seed, level: 0.9 };
        let e1 = b.mean(&xs);
        prop_assert_eq!(e1, b.mean(&xs));
        prop_assert!(e1.lo <= e1.hi);
    }
}
