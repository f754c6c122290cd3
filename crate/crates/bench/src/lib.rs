//! Shared fixtures for the benchmarks.

use spdelab_core::presets::{InitialCondition, NoiseCoefficient, Reaction};
use spdelab_core::{Boundary, Grid, KernelOptions, KernelTable, ModelSpec, SeedSpec, Stream};

/// Sine reaction with bounded multiplicative noise on `[0, 1]`.
pub fn nonlinear_model(boundary: Boundary) -> ModelSpec {
    ModelSpec {
        g: Reaction::Sine { amplitude: 1.0, frequency: 1.0 },
        sigma: NoiseCoefficient::BoundedSigmoid { amplitude: 1.0, slope: 2.0 },
        u0: InitialCondition::SineMode { amplitude: 0.5, mode: 1 },
        ..ModelSpec::additive(boundary, 1.0)
    }
}

pub fn kernel_table(model: &ModelSpec, n: usize) -> KernelTable {
    let grid = Grid::new(0.5, 1.0, n, n).expect("grid");
    KernelTable::build(&model.operator, &grid, KernelOptions::default()).expect("kernel")
}

/// `n` standard normal points in `dim` dimensions, shifted by `shift`.
pub fn gaussian_cloud(n: usize, dim: usize, shift: f64, seed: u64) -> Vec<Vec<f64>> {
    let s = SeedSpec::new(seed, 0);
    (0..n)
        .map(|i| (0..dim).map(|k| s.gaussian(Stream::Synthetic, (i * dim + k) as u64) + shift).collect())
        .collect()
}
