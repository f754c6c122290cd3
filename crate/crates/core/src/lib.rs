//! Stochastic heat equation driven by space-time white noise, its heat-kernel
//! functionals, and Monte Carlo checks of transportation-cost inequalities
//! built on the Girsanov coupling.

pub mod constants;
pub mod drift;
pub mod error;
pub mod girsanov;
pub mod grid;
pub mod martingale;
pub mod heat_kernel;
pub mod noise;
pub mod parallel;
pub mod presets;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use grid::Grid;
pub use heat_kernel::{Boundary, KernelOptions, KernelTable, OperatorSpec};
pub use noise::{CounterNoise, NoiseRows, NoiseSheet};
pub use rng::{SeedSpec, Stream};
pub use constants::LipschitzData;
pub use drift::{DriftSpec, PastView};
pub use solver::{CoupledPair, FieldPath, ModelSpec, Solver};
pub use girsanov::{RunSpec, TciMode, TciReport, Verdict};
