use spdelab_core::girsanov::{
    deterministic_entropy, entropy, rn_exponent, tci_experiment_l2, tci_experiment_sup,
};
use spdelab_core::parallel::run_replicas;
use spdelab_core::presets::{InitialCondition, NoiseCoefficient, Reaction};
use spdelab_core::stats::{mean, std_error, Bootstrap};
use spdelab_core::{
    Boundary, DriftSpec, Grid, KernelOptions, KernelTable, ModelSpec, NoiseSheet, RunSpec,
    SeedSpec, Solver, Verdict,
};

fn table(boundary: Boundary, horizon: f64, nt: usize, nx: usize) -> KernelTable {
    let grid = Grid::new(horizon, 1.0, nt, nx).unwrap();
    let model = ModelSpec::additive(boundary, 1.0);
    KernelTable::build(&model.operator, &grid, KernelOptions::default()).unwrap()
}

#[test]
fn constant_drift_entropy_to_machine_precision() {
    for (t, d, nt, nx, c) in [(0.5, 1.0, 16, 16, 1.0), (2.0, 3.0, 7, 13, -0.4), (1.0, 0.25, 100, 3, 5.0)] {
        let grid = Grid::new(t, d, nt, nx).unwrap();
        let h = deterministic_entropy(&DriftSpec::constant(c), &grid).unwrap();
        let exact = 0.5 * c * c * t * d;
        assert!((h - exact).abs() <= 4.0 * f64::EPSILON * exact, "{h} vs {exact}");
    }
}

#[test]
fn sine_drift_entropy() {
    let grid = Grid::new(0.8, 2.0, 20, 64).unwrap();
    let h = deterministic_entropy(&DriftSpec::SineSpace { amplitude: 1.0, mode: 1 }, &grid).unwrap();
    // ½·∫∫ sin² = ½·(T·D/2)
    assert!((h - 0.25 * 0.8 * 2.0).abs() < 1e-3);
}

#[test]
fn state_dependent_entropy_is_the_mean_drift_energy() {
    let model = ModelSpec {
        u0: InitialCondition::Constant { value: 0.3 },
        ..ModelSpec::additive(Boundary::Periodic, 1.0)
    };
    let t = table(Boundary::Periodic, 0.5, 16, 16);
    let solver = Solver::new(&model, &t).unwrap();
    let drift = DriftSpec::Feedback { gain: 2.0, cap: 0.7 };
    let paths = run_replicas(200, None, |r| {
        let noise = NoiseSheet::sample(solver.grid(), SeedSpec::new(5, r));
        Ok(solver.solve_with_drift(&noise, &drift)?.0)
    })
    .unwrap();
    let h = entropy(&drift, &paths, &Bootstrap::default()).unwrap();
    assert!(h.lo <= h.value && h.value <= h.hi);
    assert!(h.value > 0.0 && h.value <= 0.5 * 0.49 * 0.5);
}

/// Radon–Nikodým density at `T` under `ℙ`: the path is driven by the raw
/// sheet and the drift is read along it.
fn densities(drift: &DriftSpec, replicas: u32) -> Vec<f64> {
    let model = ModelSpec {
        u0: InitialCondition::SineMode { amplitude: 1.0, mode: 1 },
        ..ModelSpec::additive(Boundary::Dirichlet, 1.0)
    };
    let t = table(Boundary::Dirichlet, 0.5, 16, 16);
    let solver = Solver::new(&model, &t).unwrap();
    let grid = *solver.grid();
    run_replicas(replicas, None, |r| {
        let noise = NoiseSheet::sample(&grid, SeedSpec::new(404, r));
        let path = solver.solve(&noise)?;
        let cells = drift.evaluate_along(&grid, solver.points(), path.values())?;
        Ok(*rn_exponent(&cells, &noise)?.last().unwrap())
    })
    .unwrap()
}

#[test]
fn density_has_unit_mean_for_bounded_drifts() {
    for drift in [
        DriftSpec::constant(1.0),
        DriftSpec::SineSpace { amplitude: 1.5, mode: 2 },
        DriftSpec::Feedback { gain: 1.0, cap: 1.0 },
    ] {
        let m = densities(&drift, 10_000);
        assert!((mean(&m) - 1.0).abs() < 3.0 * std_error(&m), "{drift:?}: {}", mean(&m));
        assert!(m.iter().all(|&x| x > 0.0));
    }
}

#[test]
fn density_variance_is_lognormal() {
    let c: f64 = 1.0;
    let m = densities(&DriftSpec::constant(c), 10_000);
    let sq: Vec<f64> = m.iter().map(|x| (x - 1.0).powi(2)).collect();
    let exact = (c * c * 0.5).exp() - 1.0;
    assert!((mean(&sq) - exact).abs() < 3.0 * std_error(&sq), "{} vs {exact}", mean(&sq));
}

#[test]
fn zero_drift_has_zero_ratio() {
    let model = ModelSpec::additive(Boundary::Dirichlet, 1.0);
    let t = table(Boundary::Dirichlet, 0.5, 16, 16);
    let out = tci_experiment_sup(&model, &t, &DriftSpec::Zero, &RunSpec::new(1, 50)).unwrap();
    assert_eq!(out.report.ratio.value, 0.0);
    assert_eq!(out.report.entropy.value, 0.0);
    assert!(out.report.passed());
}

#[test]
fn sup_norm_inequality_with_unit_noise() {
    let model = ModelSpec {
        g: Reaction::Sine { amplitude: 1.0, frequency: 1.0 },
        ..ModelSpec::additive(Boundary::Dirichlet, 1.0)
    };
    let t = table(Boundary::Dirichlet, 0.5, 32, 32);
    let out =
        tci_experiment_sup(&model, &t, &DriftSpec::constant(1.0), &RunSpec::new(2024, 1000)).unwrap();
    let r = &out.report;
    assert_eq!(r.constant.name, "C_inf");
    assert!(r.ratio.hi < 1.0, "ratio {:?}", r.ratio);
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.gronwall.passed, "{:?}", r.gronwall);
    assert!(r.gronwall.pathwise_sup.is_some());
    assert!((r.entropy.value - 0.25).abs() < 1e-12);
}

#[test]
fn l2_inequality_with_bounded_multiplicative_noise() {
    let model = ModelSpec {
        g: Reaction::Sine { amplitude: 1.0, frequency: 1.0 },
        sigma: NoiseCoefficient::BoundedSigmoid { amplitude: 1.0, slope: 2.0 },
        u0: InitialCondition::SineMode { amplitude: 0.5, mode: 1 },
        ..ModelSpec::additive(Boundary::Neumann, 1.0)
    };
    let t = table(Boundary::Neumann, 0.5, 32, 32);
    let drift = DriftSpec::Feedback { gain: 1.0, cap: 1.0 };
    let out = tci_experiment_l2(&model, &t, &drift, &RunSpec::new(7, 1000)).unwrap();
    let r = &out.report;
    assert_eq!(r.constant.name, "C_2_alpha");
    assert!(r.constant.optimized);
    let alpha = r.constant.alpha.unwrap();
    assert!(alpha > 1.0 && alpha < 2.0);
    assert!(r.ratio.hi < 1.0, "ratio {:?}", r.ratio);
    assert!(r.gronwall.passed, "{:?}", r.gronwall);
    assert!(r.gronwall.pathwise_sup.is_none());
}

#[test]
fn sup_check_rejects_non_unit_noise() {
    let model = ModelSpec::additive(Boundary::Dirichlet, 2.0);
    let t = table(Boundary::Dirichlet, 0.5, 8, 8);
    assert!(tci_experiment_sup(&model, &t, &DriftSpec::Zero, &RunSpec::new(1, 4)).is_err());
}

#[test]
fn experiments_are_thread_count_invariant() {
    let model = ModelSpec {
        g: Reaction::Sine { amplitude: 1.0, frequency: 1.0 },
        sigma: NoiseCoefficient::InverseSqrt { amplitude: 1.0 },
        ..ModelSpec::additive(Boundary::Periodic, 1.0)
    };
    let t = table(Boundary::Periodic, 0.5, 16, 16);
    let drift = DriftSpec::Feedback { gain: 2.0, cap: 0.5 };
    let run = |threads| {
        let spec = RunSpec { threads: Some(threads), ..RunSpec::new(99, 64) };
        tci_experiment_l2(&model, &t, &drift, &spec).unwrap().report
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}
