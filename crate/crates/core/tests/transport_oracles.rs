use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spdelab_core::girsanov::simulate_pairs;
use spdelab_core::presets::Reaction;
use spdelab_core::stats::Bootstrap;
use spdelab_core::transport::{
    cost_matrix, coupling_upper_bound, wasserstein2_entropic, wasserstein2_exact, MetricKind,
    SampleCloud, SinkhornOptions,
};
use spdelab_core::{
    Boundary, DriftSpec, Grid, KernelOptions, KernelTable, ModelSpec, RunSpec, Solver,
};

fn gaussian(n: usize, dim: usize, shift: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + shift.get(k).copied().unwrap_or(0.0)
                })
                .collect()
        })
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn translation_distance_is_recovered() {
    let s = [2.0, -2.0, 1.0, 2.0, -1.0];
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let base = gaussian(200, 5, &[], 1);

    let same = SampleCloud::euclidean(base.clone()).unwrap();
    let moved: Vec<Vec<f64>> =
        base.iter().map(|p| p.iter().zip(&s).map(|(x, d)| x + d).collect()).collect();
    let exact = wasserstein2_exact(&same, &SampleCloud::euclidean(moved).unwrap()).unwrap();
    assert!((exact.w2 - norm).abs() < 1e-9);

    let other = SampleCloud::euclidean(gaussian(200, 5, &s, 2)).unwrap();
    let w2 = wasserstein2_exact(&same, &other).unwrap().w2;
    assert!((w2 / norm - 1.0).abs() < 0.10, "{w2} vs {norm}");
}

#[test]
fn entropic_agrees_with_exact_at_small_epsilon() {
    let a = SampleCloud::euclidean(gaussian(128, 5, &[], 11)).unwrap();
    let b = SampleCloud::euclidean(gaussian(128, 5, &[0.5, 0.0, -0.5, 0.0, 0.25], 12)).unwrap();
    let cost = cost_matrix(&a, &b).unwrap();
    let eps = 1e-3 * median(cost.iter().copied().collect());
    let exact = wasserstein2_exact(&a, &b).unwrap();
    let entropic = wasserstein2_entropic(&a, &b, eps, &SinkhornOptions::default()).unwrap();
    assert!((entropic.w2 / exact.w2 - 1.0).abs() < 0.02, "{} vs {}", entropic.w2, exact.w2);
    let gap = entropic.dual_gap.unwrap();
    assert!(gap >= -1e-9);
    let primal = entropic.w2 * entropic.w2;
    let w2sq = exact.w2 * exact.w2;
    assert!(w2sq <= primal + 1e-9 && w2sq >= primal - gap - 1e-9);
}

#[test]
fn identical_clouds_cost_vanishes_with_epsilon() {
    let pts = gaussian(64, 3, &[], 21);
    let a = SampleCloud::euclidean(pts.clone()).unwrap();
    let b = SampleCloud::euclidean(pts).unwrap();
    let diameter = cost_matrix(&a, &b).unwrap().max().sqrt();
    let r = wasserstein2_entropic(&a, &b, 1e-3, &SinkhornOptions::default()).unwrap();
    assert!(r.w2 * r.w2 < 1e-2 * diameter, "{} vs {diameter}", r.w2);
    assert_eq!(wasserstein2_exact(&a, &b).unwrap().w2, 0.0);
}

#[test]
fn exact_distance_is_a_metric_on_clouds() {
    let clouds: Vec<SampleCloud> = (0..3)
        .map(|k| SampleCloud::euclidean(gaussian(60, 4, &[k as f64 * 0.3], 30 + k)).unwrap())
        .collect();
    let d = |i: usize, j: usize| wasserstein2_exact(&clouds[i], &clouds[j]).unwrap().w2;
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(d(i, j), d(j, i));
        }
    }
    assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    assert!(d(0, 1) <= d(0, 2) + d(2, 1) + 1e-9);
    assert!(d(1, 2) <= d(1, 0) + d(0, 2) + 1e-9);
}

#[test]
fn exact_below_girsanov_coupling() {
    let model = ModelSpec {
        g: Reaction::Sine { amplitude: 1.0, frequency: 1.0 },
        ..ModelSpec::additive(Boundary::Dirichlet, 1.0)
    };
    let grid = Grid::new(0.5, 1.0, 16, 16).unwrap();
    let table = KernelTable::build(&model.operator, &grid, KernelOptions::default()).unwrap();
    let solver = Solver::new(&model, &table).unwrap();
    let pairs =
        simulate_pairs(&solver, &DriftSpec::constant(1.0), &RunSpec::new(77, 200)).unwrap();
    for kind in [MetricKind::L2, MetricKind::Sup] {
        let u = SampleCloud::from_paths(pairs.iter().map(|p| &p.u), kind).unwrap();
        let v = SampleCloud::from_paths(pairs.iter().map(|p| &p.v), kind).unwrap();
        let exact = wasserstein2_exact(&u, &v).unwrap().w2;
        let bound = coupling_upper_bound(&pairs, kind, &Bootstrap::default()).unwrap().w2;
        assert!(exact <= bound + 1e-12, "{kind:?}: {exact} > {bound}");
    }
}

#[test]
fn size_limits_are_enforced() {
    let a = SampleCloud::euclidean(gaussian(3, 2, &[], 1)).unwrap();
    let b = SampleCloud::euclidean(gaussian(4, 2, &[], 2)).unwrap();
    assert!(wasserstein2_exact(&a, &b).is_err());
    let big = SampleCloud::euclidean(gaussian(513, 1, &[], 3)).unwrap();
    assert!(wasserstein2_exact(&big, &big).is_err());
}
