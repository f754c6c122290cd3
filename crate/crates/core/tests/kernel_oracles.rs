use std::f64::consts::PI;

use spdelab_core::heat_kernel::build_generator;
use spdelab_core::{Boundary, Grid, KernelOptions, KernelTable, OperatorSpec};

fn table(boundary: Boundary, horizon: f64, nt: usize, nx: usize) -> KernelTable {
    let grid = Grid::new(horizon, 1.0, nt, nx).unwrap();
    KernelTable::build(&OperatorSpec::heat(boundary), &grid, KernelOptions::default()).unwrap()
}

/// `∫_0^T ∫ G² dy dt` for the Dirichlet sine series of `½∂²` on `[0, 1]`.
fn series_square_integral(x: f64, horizon: f64, terms: usize) -> f64 {
    (1..=terms)
        .map(|m| {
            let lam = (m as f64 * PI).powi(2);
            2.0 * (m as f64 * PI * x).sin().powi(2) * (1.0 - (-lam * horizon).exp()) / lam
        })
        .sum()
}

fn power_bound(horizon: f64, alpha: f64) -> f64 {
    horizon.powf(1.0 - alpha / 2.0) / ((1.0 - alpha / 2.0) * (2.0 * PI.sqrt()).powf(alpha))
}

#[test]
fn smallest_dirichlet_eigenvalue() {
    let grid = Grid::new(1.0, 1.0, 4, 64).unwrap();
    let gen = build_generator(&OperatorSpec::heat(Boundary::Dirichlet), &grid).unwrap();
    let eig = nalgebra::SymmetricEigen::new(gen).eigenvalues;
    let top = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((top / (-PI * PI / 2.0) - 1.0).abs() < 0.01, "λ = {top}");
}

#[test]
fn dirichlet_kernel_matches_sine_series() {
    let t = table(Boundary::Dirichlet, 0.2, 2, 128);
    let pts = t.points();
    let g = t.kernel(1);
    let mut err2 = 0.0;
    let mut norm2 = 0.0;
    for (j, &x) in pts.iter().enumerate() {
        for (k, &y) in pts.iter().enumerate() {
            let series: f64 = (1..=200)
                .map(|m| {
                    let m = m as f64;
                    2.0 * (m * PI * x).sin() * (m * PI * y).sin() * (-m * m * PI * PI * 0.1 / 2.0).exp()
                })
                .sum();
            err2 += (g[(j, k)] - series).powi(2);
            norm2 += series * series;
        }
    }
    let rel = (err2 / norm2).sqrt();
    assert!(rel < 1e-4, "relative error {rel}");
}

#[test]
fn h_is_dominated_by_the_whole_line() {
    let t = table(Boundary::Dirichlet, 1.0, 64, 96);
    let grid = *t.grid();
    let dx2 = grid.dx().powi(2);
    for (i, h) in t.h_function().into_iter().enumerate().skip(1) {
        let time = grid.time(i);
        // The lattice symbol 4 sin²(kh/2)/h² under-damps high modes, which
        // lifts Σ G² dx by h²/(16t) to leading order; allow twice that.
        let bound = (1.0 + dx2 / (8.0 * time)) / (2.0 * (PI * time).sqrt());
        assert!(h >= 0.0);
        assert!(h <= bound, "H(t_{i}) = {h} > {bound}");
    }
}

#[test]
fn periodic_h_flattens_to_uniform() {
    let t = table(Boundary::Periodic, 4.0, 8, 32);
    let h = *t.h_function().last().unwrap();
    assert!((h - 1.0).abs() < 1e-6, "H = {h}");
}

#[test]
fn g_total_against_series_and_whole_line() {
    let t = table(Boundary::Dirichlet, 1.0, 64, 128);
    let g = t.g_total();
    assert!(g <= PI.powf(-0.5) * 1.001, "𝒢_T = {g}");
    let oracle = (0..=400)
        .map(|j| series_square_integral(j as f64 / 400.0, 1.0, 100_000))
        .fold(0.0, f64::max);
    assert!((g / oracle - 1.0).abs() < 0.05, "𝒢_T = {g}, series {oracle}");
}

#[test]
fn g_total_grid_convergence_and_monotonicity() {
    let coarse = table(Boundary::Dirichlet, 0.5, 32, 64).g_total();
    let fine = table(Boundary::Dirichlet, 0.5, 32, 128).g_total();
    assert!((fine / coarse - 1.0).abs() < 0.01, "{coarse} vs {fine}");
    let mut last = 0.0;
    for horizon in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let g = table(Boundary::Dirichlet, horizon, 16, 64).g_total();
        assert!(g > last);
        last = g;
    }
}

#[test]
fn g_alpha_power_bound_and_limit() {
    let t = table(Boundary::Dirichlet, 1.0, 64, 96);
    for alpha in [1.2, 1.5, 1.8] {
        let g = t.g_const_alpha(alpha).unwrap();
        assert!(g.is_finite() && g > 0.0);
        assert!(g <= power_bound(1.0, alpha), "α = {alpha}: {g} > {}", power_bound(1.0, alpha));
    }
    let near = t.g_const_alpha(1.0 + 1e-5).unwrap();
    assert!((near / t.h_integral() - 1.0).abs() < 1e-3);
    assert!(t.g_const_alpha(2.0).is_err());
    assert!(t.g_const_alpha(1.0).is_err());
    let shorter = table(Boundary::Dirichlet, 0.5, 32, 96);
    for alpha in [1.2, 1.5, 1.8] {
        assert!(shorter.g_const_alpha(alpha).unwrap() <= t.g_const_alpha(alpha).unwrap());
    }
}

#[test]
fn chapman_kolmogorov_at_nx_64() {
    for boundary in [Boundary::Dirichlet, Boundary::Neumann, Boundary::Periodic] {
        let t = table(boundary, 1.0, 16, 64);
        for (i, l) in [(1, 1), (3, 5), (7, 8), (2, 14)] {
            let d = t.chapman_kolmogorov_defect(i, l);
            assert!(d < 1e-6, "{boundary:?} ({i},{l}): {d}");
        }
    }
}

#[test]
fn dirichlet_below_neumann() {
    let d = table(Boundary::Dirichlet, 0.5, 8, 48);
    let n = table(Boundary::Neumann, 0.5, 8, 48);
    for i in 0..=8 {
        let diff = d.kernel(i) - n.kernel(i);
        assert!(diff.max() <= 1e-10, "slice {i}: {}", diff.max());
    }
    let (lo, hi) = n.mass_range();
    assert!((lo - 1.0).abs() < 1e-8 && (hi - 1.0).abs() < 1e-8);
    assert!(d.mass_range().1 <= 1.0 + 1e-10);
}

#[test]
fn functionals_ignore_column_order() {
    let t = table(Boundary::Neumann, 0.5, 8, 40);
    let dx = t.grid().dx();
    let perm: Vec<usize> = (0..40).map(|k| (k * 17 + 3) % 40).collect();
    let h = t.h_function();
    for (i, &hi) in h.iter().enumerate().take(9) {
        let g = t.kernel(i);
        let permuted = g.select_columns(perm.iter());
        let hp = permuted
            .row_iter()
            .map(|r| r.norm_squared() * dx)
            .fold(0.0, f64::max);
        assert!((hp - hi).abs() <= 1e-12 * hi.max(1.0));
    }
}

#[test]
fn initial_sine_decays_exponentially() {
    let t = table(Boundary::Dirichlet, 0.25, 8, 128);
    let pts = t.points();
    let u0: Vec<f64> = pts.iter().map(|x| (PI * x).sin()).collect();
    let conv = t.initial_convolution(&u0).unwrap();
    for i in 0..=8 {
        let decay = (-PI * PI * t.grid().time(i) / 2.0).exp();
        let row = &conv[i * 128..(i + 1) * 128];
        let num: f64 = row.iter().zip(&u0).map(|(a, b)| (a - decay * b).powi(2)).sum();
        let den: f64 = u0.iter().map(|b| (decay * b).powi(2)).sum();
        assert!((num / den).sqrt() < 1e-3);
    }
    let zero = t.initial_convolution(&vec![0.0; 128]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    let n = table(Boundary::Neumann, 0.25, 8, 32);
    let ones = n.initial_convolution(&vec![1.0; 32]).unwrap();
    assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-10));
}
